"""Dense-tensor building blocks: softmax, normalization, AdamW, gradient checks.

Tensors are plain ``numpy.ndarray`` values. Verification paths run in
float64; anything used inside a gradient check must be fed float64 inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import kernels
from .errors import DegenerateInputError, EvaluationError, ParameterError

NORM_EPS = 1e-12

# AdamW defaults; lr and weight decay travel in OptimState
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

ParamDict = dict[str, np.ndarray]
LossFn = Callable[[ParamDict], tuple[float, ParamDict]]


def require_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{what} contains non-finite values")
    return x


def softmax_rows(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of ``logits / temperature`` with max subtraction."""
    if temperature <= 0.0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ParameterError(f"softmax_rows expects a 2-D tensor, got shape {logits.shape}")
    require_finite(logits, "logits")
    scaled = logits / temperature
    scaled = scaled - scaled.max(axis=1, keepdims=True)
    e = np.exp(scaled)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise log-softmax, numerically stable companion of softmax_rows."""
    if temperature <= 0.0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    scaled = np.asarray(logits, dtype=np.float64) / temperature
    scaled = scaled - scaled.max(axis=1, keepdims=True)
    return scaled - np.log(np.exp(scaled).sum(axis=1, keepdims=True))


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n <= NORM_EPS:
        raise DegenerateInputError(f"cannot normalize vector with norm {n:.3e}")
    return v / n


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise l2_normalize for 2-D tensors."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms <= NORM_EPS):
        bad = int(np.argmin(norms))
        raise DegenerateInputError(f"row {bad} has near-zero norm {float(norms[bad, 0]):.3e}")
    return x / norms


def normalize_rows_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Backprop through normalize_rows: rows y = x/|x|."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    y = x / norms
    dot = np.sum(y * grad_out, axis=1, keepdims=True)
    return (grad_out - y * dot) / norms


@dataclass
class OptimState:
    """Per-tensor AdamW accumulators plus the shared step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int
    lr: float
    weight_decay: float

    @classmethod
    def for_param(cls, param: np.ndarray, lr: float, weight_decay: float) -> "OptimState":
        return cls(
            m=np.zeros_like(param, dtype=np.float64),
            v=np.zeros_like(param, dtype=np.float64),
            step=0,
            lr=lr,
            weight_decay=weight_decay,
        )


def adamw_step(
    params: np.ndarray, grads: np.ndarray, state: OptimState
) -> tuple[np.ndarray, OptimState]:
    """One AdamW update; returns fresh arrays, inputs are untouched.

    Decoupled decay: theta <- theta * (1 - lr*wd) before the adaptive step.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ParameterError(f"params shape {params.shape} != grads shape {grads.shape}")
    if state.m.shape != params.shape or state.v.shape != params.shape:
        raise ParameterError("optimizer state shape does not match the parameter")
    new_params = params.copy()
    new_state = OptimState(
        m=state.m.copy(), v=state.v.copy(), step=state.step + 1, lr=state.lr, weight_decay=state.weight_decay
    )
    kernels.adamw_update(
        new_params,
        np.ascontiguousarray(grads),
        new_state.m,
        new_state.v,
        new_state.step,
        state.lr,
        state.weight_decay,
        ADAM_BETA1,
        ADAM_BETA2,
        ADAM_EPS,
    )
    require_finite(new_params, "updated parameters")
    return new_params, new_state


class AdamW:
    """AdamW over a named-parameter dict; updates tensors in place."""

    def __init__(self, params: ParamDict, lr: float, weight_decay: float):
        self.lr = lr
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()}
        self._v = {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()}

    def step(self, params: ParamDict, grads: ParamDict) -> None:
        self.step_count += 1
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ParameterError(f"grad shape {g.shape} != param shape {p.shape} for '{name}'")
            kernels.adamw_update(
                p,
                np.ascontiguousarray(g, dtype=np.float64),
                self._m[name],
                self._v[name],
                self.step_count,
                self.lr,
                self.weight_decay,
                ADAM_BETA1,
                ADAM_BETA2,
                ADAM_EPS,
            )


@dataclass
class GradCheckReport:
    """Outcome of a central-difference gradient check."""

    max_rel_error: float
    tol: float
    passed: bool
    worst_param: str = ""
    worst_index: int = -1
    per_param: dict[str, float] = field(default_factory=dict)


def _as_param_dict(params) -> ParamDict:
    if isinstance(params, np.ndarray):
        return {"theta": params}
    if isinstance(params, Mapping):
        return dict(params)
    raise ParameterError(f"unsupported parameter container: {type(params).__name__}")


def finite_diff_check(loss_fn: LossFn, params, h: float = 1e-5, tol: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` maps a param dict to ``(loss, grads)`` and must be
    deterministic. Relative error per coordinate is
    ``|a - n| / max(1, |a|, |n|)``.
    """
    if not (1e-6 <= h <= 1e-3):
        raise ParameterError(f"step size h={h} outside [1e-6, 1e-3]")
    base = {k: np.array(v, dtype=np.float64) for k, v in _as_param_dict(params).items()}
    single = isinstance(params, np.ndarray)

    def evaluate(p: ParamDict) -> tuple[float, ParamDict]:
        if single:
            loss, grads = loss_fn(p["theta"])
            grads = _as_param_dict(grads)
        else:
            loss, grads = loss_fn(p)
        return float(loss), grads

    loss0, analytic = evaluate(base)
    if not np.isfinite(loss0):
        raise EvaluationError(f"loss is non-finite at the expansion point: {loss0}")

    report = GradCheckReport(max_rel_error=0.0, tol=tol, passed=True)
    work = {k: v.copy() for k, v in base.items()}
    for name, tensor in work.items():
        flat = tensor.ravel()
        a_flat = np.asarray(analytic[name], dtype=np.float64).ravel()
        if a_flat.shape != flat.shape:
            raise ParameterError(f"analytic grad shape mismatch for '{name}'")
        worst_here = 0.0
        for idx in range(flat.size):
            saved = flat[idx]
            flat[idx] = saved + h
            f_plus, _ = evaluate(work)
            flat[idx] = saved - h
            f_minus, _ = evaluate(work)
            flat[idx] = saved
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise EvaluationError(f"non-finite loss while perturbing '{name}'[{idx}]")
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(a_flat[idx])
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst_here = max(worst_here, rel)
            if rel > report.max_rel_error:
                report.max_rel_error = rel
                report.worst_param = name
                report.worst_index = idx
        report.per_param[name] = worst_here
    report.passed = report.max_rel_error <= tol
    return report
