"""Pure-numpy implementations of the hot kernels.

These are the fallback backend and the behavioural reference for the
compiled extension: the Cython code mirrors the exact same arithmetic
expression order so both backends agree to the last few ulps.
"""

from __future__ import annotations

import numpy as np

# tanh-form approximation constants, also used by the compiled kernel
GELU_C0 = 0.7978845608028654  # sqrt(2/pi)
GELU_C1 = 0.044715


def bilinear_resize(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize an (H, W, C) float64 image with bilinear interpolation.

    Uses the half-pixel coordinate convention with edge clamping.
    """
    h, w, _ = src.shape
    src = np.ascontiguousarray(src, dtype=np.float64)

    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)

    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]

    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU activation (tanh form)."""
    x = np.asarray(x, dtype=np.float64)
    u = GELU_C0 * (x + GELU_C1 * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(u))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """Elementwise derivative of :func:`gelu`."""
    x = np.asarray(x, dtype=np.float64)
    u = GELU_C0 * (x + GELU_C1 * x * x * x)
    t = np.tanh(u)
    du = GELU_C0 * (1.0 + 3.0 * GELU_C1 * x * x)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du


def adamw_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    weight_decay: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One fused, in-place AdamW update with decoupled weight decay.

    ``step`` is the 1-based count including this update (bias correction).
    """
    param *= 1.0 - lr * weight_decay
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
