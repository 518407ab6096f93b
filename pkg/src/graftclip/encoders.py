"""Small image and text encoders with hand-derived backward passes.

Image path: patchify -> linear patch embedding + positional embedding ->
mean-pool over patches -> two-layer GELU MLP -> projection -> l2 normalize.
Text path is the same with a token-embedding lookup and PAD-masked pooling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, ParameterError
from .numerics import ParamDict, normalize_rows, normalize_rows_backward
from .rng import make_rng

PAD_ID = 0
OOV_ID = 1


@dataclass(frozen=True)
class EncoderConfig:
    kind: str  # "image" | "text"
    d_model: int
    hidden_dim: int
    d_out: int
    image_size: int = 0  # square input extent, image encoders
    patch_size: int = 0  # image encoders
    vocab_size: int = 0  # text encoders
    init_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("image", "text"):
            raise ConfigurationError(f"unknown encoder kind '{self.kind}'")
        if min(self.d_model, self.hidden_dim, self.d_out) <= 0:
            raise ConfigurationError("encoder dims must be positive")
        if self.d_out < 8:
            raise ConfigurationError(f"d_out must be >= 8, got {self.d_out}")
        if self.kind == "image":
            if self.patch_size <= 0 or self.image_size <= 0:
                raise ConfigurationError("image encoder needs positive patch_size and image_size")
            if self.image_size % self.patch_size != 0:
                raise ConfigurationError(
                    f"patch size {self.patch_size} does not divide image size {self.image_size}"
                )
        else:
            if self.vocab_size <= 2:
                raise ConfigurationError("text encoder needs vocab_size > 2 (PAD and OOV are reserved)")

    @property
    def n_patches(self) -> int:
        side = self.image_size // self.patch_size
        return side * side

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3


@dataclass
class Encoder:
    config: EncoderConfig
    params: ParamDict


def param_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    if config.kind == "image":
        shapes["patch_embed"] = (config.patch_dim, config.d_model)
        shapes["pos_embed"] = (config.n_patches, config.d_model)
    else:
        shapes["token_embed"] = (config.vocab_size, config.d_model)
    shapes["mlp_w1"] = (config.d_model, config.hidden_dim)
    shapes["mlp_b1"] = (config.hidden_dim,)
    shapes["mlp_w2"] = (config.hidden_dim, config.d_model)
    shapes["mlp_b2"] = (config.d_model,)
    shapes["proj"] = (config.d_model, config.d_out)
    return shapes


def fan_in_for(config: EncoderConfig, name: str) -> int:
    """Fan-in governing the init bound of a weight tensor.

    Matrices that multiply activations use their input dimension; lookup
    tables (token and positional embeddings) use d_model.
    """
    if name in ("pos_embed", "token_embed"):
        return config.d_model
    return param_shapes(config)[name][0]


def init_params(config: EncoderConfig) -> Encoder:
    """Fresh parameters: weights uniform in +-1/sqrt(fan_in), biases zero.

    Each tensor draws from its own named substream, so tensors shared
    between two configs (same init seed, same shape) initialize equal even
    when other shapes differ.
    """
    params: ParamDict = {}
    for name, shape in param_shapes(config).items():
        if name.startswith("mlp_b"):
            params[name] = np.zeros(shape, dtype=np.float64)
            continue
        bound = 1.0 / np.sqrt(fan_in_for(config, name))
        rng = make_rng(config.init_seed, config.kind, name)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return Encoder(config=config, params=params)


def patchify(images: np.ndarray, patch_size: int) -> np.ndarray:
    """(B, H, W, 3) -> (B, n_patches, patch_size*patch_size*3), row-major patches."""
    b, h, w, c = images.shape
    ph, pw = h // patch_size, w // patch_size
    x = images.reshape(b, ph, patch_size, pw, patch_size, c)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return np.ascontiguousarray(x).reshape(b, ph * pw, patch_size * patch_size * c)


def _head_forward(params: ParamDict, pooled: np.ndarray) -> tuple[np.ndarray, dict]:
    h1 = pooled @ params["mlp_w1"] + params["mlp_b1"]
    a1 = kernels.gelu(h1)
    h2 = a1 @ params["mlp_w2"] + params["mlp_b2"]
    z = h2 @ params["proj"]
    out = normalize_rows(z)
    cache = {"pooled": pooled, "h1": h1, "a1": a1, "h2": h2, "z": z}
    return out, cache


def _head_backward(params: ParamDict, cache: dict, grad_out: np.ndarray) -> tuple[ParamDict, np.ndarray]:
    dz = normalize_rows_backward(cache["z"], grad_out)
    grads: ParamDict = {}
    grads["proj"] = cache["h2"].T @ dz
    dh2 = dz @ params["proj"].T
    grads["mlp_w2"] = cache["a1"].T @ dh2
    grads["mlp_b2"] = dh2.sum(axis=0)
    da1 = dh2 @ params["mlp_w2"].T
    dh1 = da1 * kernels.gelu_grad(cache["h1"])
    grads["mlp_w1"] = cache["pooled"].T @ dh1
    grads["mlp_b1"] = dh1.sum(axis=0)
    dpooled = dh1 @ params["mlp_w1"].T
    return grads, dpooled


def encode_image_batch(enc: Encoder, images: np.ndarray) -> tuple[np.ndarray, dict]:
    """Encode (B, H, W, 3) images to (B, d_out) unit rows; returns a backward cache."""
    cfg = enc.config
    if cfg.kind != "image":
        raise ParameterError("encode_image_batch requires an image encoder")
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or images.shape[3] != 3:
        raise ParameterError(f"expected (B, H, W, 3) images, got {images.shape}")
    if images.shape[1] % cfg.patch_size or images.shape[2] % cfg.patch_size:
        raise ParameterError(
            f"image extent {images.shape[1:3]} not divisible by patch size {cfg.patch_size}"
        )
    patches = patchify(images, cfg.patch_size)
    if patches.shape[1] != cfg.n_patches:
        raise ParameterError(
            f"image yields {patches.shape[1]} patches, encoder expects {cfg.n_patches}"
        )
    embedded = patches @ enc.params["patch_embed"] + enc.params["pos_embed"][None, :, :]
    pooled = embedded.mean(axis=1)
    out, cache = _head_forward(enc.params, pooled)
    cache["patches"] = patches
    return out, cache


def encode_image_backward(enc: Encoder, cache: dict, grad_out: np.ndarray) -> ParamDict:
    grads, dpooled = _head_backward(enc.params, cache, grad_out)
    n_patches = enc.config.n_patches
    d_embedded = dpooled[:, None, :] / n_patches  # broadcast over patches
    grads["pos_embed"] = np.repeat(dpooled.sum(axis=0, keepdims=True) / n_patches, n_patches, axis=0)
    patches = cache["patches"]
    b, p, pd = patches.shape
    grads["patch_embed"] = patches.reshape(b * p, pd).T @ np.broadcast_to(
        d_embedded, (b, p, dpooled.shape[1])
    ).reshape(b * p, -1)
    return grads


def encode_image(enc: Encoder, image: np.ndarray) -> np.ndarray:
    """Single-image embedding, unit norm."""
    out, _ = encode_image_batch(enc, np.asarray(image, dtype=np.float64)[None])
    return out[0]


def pad_token_batch(token_lists: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Pad ragged token lists with PAD_ID; returns (ids, real-token mask)."""
    if not token_lists:
        raise ParameterError("empty token batch")
    longest = max(len(t) for t in token_lists)
    ids = np.full((len(token_lists), max(longest, 1)), PAD_ID, dtype=np.int64)
    for i, toks in enumerate(token_lists):
        ids[i, : len(toks)] = toks
    return ids, ids != PAD_ID


def encode_text_batch(enc: Encoder, token_lists: Sequence[Sequence[int]]) -> tuple[np.ndarray, dict]:
    """Encode token-id lists to (B, d_out) unit rows; PAD ids are excluded from the mean."""
    cfg = enc.config
    if cfg.kind != "text":
        raise ParameterError("encode_text_batch requires a text encoder")
    for i, toks in enumerate(token_lists):
        if len(toks) == 0:
            raise ParameterError(f"token list {i} is empty")
        if max(toks) >= cfg.vocab_size or min(toks) < 0:
            raise ParameterError(f"token list {i} has ids outside [0, {cfg.vocab_size})")
    ids, mask = pad_token_batch(token_lists)
    counts = mask.sum(axis=1, keepdims=True).astype(np.float64)
    if np.any(counts == 0):
        raise ParameterError("a prompt consists only of PAD tokens")
    emb = enc.params["token_embed"][ids] * mask[:, :, None]
    pooled = emb.sum(axis=1) / counts
    out, cache = _head_forward(enc.params, pooled)
    cache["ids"] = ids
    cache["mask"] = mask
    cache["counts"] = counts
    return out, cache


def encode_text_backward(enc: Encoder, cache: dict, grad_out: np.ndarray) -> ParamDict:
    grads, dpooled = _head_backward(enc.params, cache, grad_out)
    ids, mask, counts = cache["ids"], cache["mask"], cache["counts"]
    d_emb = (dpooled[:, None, :] / counts[:, :, None]) * mask[:, :, None]
    d_table = np.zeros_like(enc.params["token_embed"])
    np.add.at(d_table, ids.ravel(), d_emb.reshape(-1, d_emb.shape[2]))
    grads["token_embed"] = d_table
    return grads


def encode_text(enc: Encoder, token_ids: Sequence[int]) -> np.ndarray:
    """Single-prompt embedding, unit norm."""
    out, _ = encode_text_batch(enc, [list(token_ids)])
    return out[0]
