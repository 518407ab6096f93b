"""Procedural image synthesis and the binary image file format.

Each class renders as a base texture family plus a local fine attribute
confined to a small square region (<= ~9% of pixels). Rendering is a pure
function of (class definition, seed): the base texture consumes only the
"base" substream and attribute randomness is drawn up front from the
"attr" substream, so sibling classes (same family, same seed, different
attribute) share every pixel outside the attribute region.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError, ParameterError
from .kernels import bilinear_resize
from .rng import make_rng

PATTERN_FAMILIES = (
    "leaf",
    "stripes",
    "speckle",
    "waves",
    "scales",
    "fur",
    "rosette",
    "grid",
    "blotch",
    "ripple",
)

ATTRIBUTE_KINDS = ("spot_density", "stripe_width", "patch_color_shift", "edge_curl")

REGION_FRACTION = 0.30  # region side relative to min image extent; area ~9%
MAX_SPOTS = 12

IMAGE_MAGIC = b"IMG1"

_PATTERN_COLORS = {
    "leaf": ((0.10, 0.32, 0.08), (0.55, 0.78, 0.30)),
    "stripes": ((0.45, 0.30, 0.08), (0.92, 0.78, 0.35)),
    "speckle": ((0.30, 0.22, 0.12), (0.82, 0.72, 0.52)),
    "waves": ((0.05, 0.15, 0.45), (0.35, 0.75, 0.90)),
    "scales": ((0.25, 0.32, 0.42), (0.78, 0.85, 0.92)),
    "fur": ((0.32, 0.20, 0.10), (0.88, 0.78, 0.60)),
    "rosette": ((0.38, 0.12, 0.40), (0.92, 0.62, 0.80)),
    "grid": ((0.28, 0.28, 0.30), (0.88, 0.88, 0.86)),
    "blotch": ((0.30, 0.32, 0.10), (0.90, 0.60, 0.25)),
    "ripple": ((0.05, 0.35, 0.38), (0.55, 0.85, 0.88)),
}


def _grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    yy = np.linspace(0.0, 1.0, h, endpoint=False)[:, None] + 0.5 / h
    xx = np.linspace(0.0, 1.0, w, endpoint=False)[None, :] + 0.5 / w
    return np.broadcast_to(yy, (h, w)), np.broadcast_to(xx, (h, w))


def _smooth_noise(rng: np.random.Generator, cells: tuple[int, int], h: int, w: int) -> np.ndarray:
    coarse = rng.random((cells[0], cells[1], 1))
    return bilinear_resize(coarse, h, w)[:, :, 0]


def _pattern_field(pattern: str, rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Scalar texture field in [0, 1] for one pattern family."""
    yy, xx = _grid(h, w)
    if pattern == "leaf":
        bend = 0.12 + 0.10 * rng.random()
        freq = 5.0 + 3.0 * rng.random()
        phase = rng.random()
        veins = np.abs(np.sin(np.pi * (freq * (xx + bend * np.sin(3.0 * np.pi * yy)) + phase)))
        return 0.25 + 0.75 * veins**1.5
    if pattern == "stripes":
        angle = 0.4 + 0.8 * rng.random()
        freq = 6.0 + 4.0 * rng.random()
        phase = rng.random()
        t = xx * np.cos(angle) + yy * np.sin(angle)
        return 0.5 + 0.5 * np.sin(2.0 * np.pi * (freq * t + phase))
    if pattern == "speckle":
        base = _smooth_noise(rng, (6, 6), h, w)
        dots = rng.random((h, w)) > 0.96
        return np.clip(0.3 + 0.5 * base + 0.6 * dots, 0.0, 1.0)
    if pattern == "waves":
        fy = 4.0 + 3.0 * rng.random()
        fx = 1.5 + 1.5 * rng.random()
        amp = 0.15 + 0.10 * rng.random()
        return 0.5 + 0.5 * np.sin(2.0 * np.pi * (fy * yy + amp * np.sin(2.0 * np.pi * fx * xx)))
    if pattern == "scales":
        fx = 6.0 + 3.0 * rng.random()
        fy = 6.0 + 3.0 * rng.random()
        phase = rng.random()
        return np.abs(np.sin(np.pi * fx * xx + phase)) * np.abs(np.sin(np.pi * fy * yy))
    if pattern == "fur":
        streaks = _smooth_noise(rng, (3, 24), h, w)
        grain = rng.random((h, w)) * 0.15
        return np.clip(0.2 + 0.75 * streaks + grain, 0.0, 1.0)
    if pattern == "rosette":
        cy = 0.4 + 0.2 * rng.random()
        cx = 0.4 + 0.2 * rng.random()
        petals = rng.integers(5, 9)
        r = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
        theta = np.arctan2(yy - cy, xx - cx)
        return 0.5 + 0.5 * np.sin(petals * theta + 6.0 * np.pi * r)
    if pattern == "grid":
        freq = 5.0 + 3.0 * rng.random()
        phase = rng.random()
        gx = np.abs(np.sin(np.pi * (freq * xx + phase)))
        gy = np.abs(np.sin(np.pi * (freq * yy + phase)))
        return np.maximum(gx, gy) ** 6
    if pattern == "blotch":
        return _smooth_noise(rng, (4, 4), h, w)
    if pattern == "ripple":
        cy = 0.35 + 0.3 * rng.random()
        cx = 0.35 + 0.3 * rng.random()
        freq = 7.0 + 4.0 * rng.random()
        r = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
        return 0.5 + 0.5 * np.sin(2.0 * np.pi * freq * r)
    raise ParameterError(f"unknown pattern family '{pattern}'")


def render_base(pattern: str, seed: int, size: tuple[int, int]) -> np.ndarray:
    """Base texture for a pattern family, (H, W, 3) float64 in [0, 1]."""
    h, w = size
    if h < 32 or w < 32:
        raise ParameterError(f"image size {size} below the 32x32 minimum")
    rng = make_rng(seed, "base")
    field = np.clip(_pattern_field(pattern, rng, h, w), 0.0, 1.0)
    lo, hi = _PATTERN_COLORS[pattern]
    jitter = rng.uniform(-0.04, 0.04, size=3)
    img = np.empty((h, w, 3), dtype=np.float64)
    for c in range(3):
        img[:, :, c] = lo[c] + (hi[c] - lo[c]) * field + jitter[c]
    return np.clip(img, 0.0, 1.0)


def attribute_region(seed: int, size: tuple[int, int]) -> tuple[int, int, int]:
    """(row0, col0, side) of the square attribute region for this sample."""
    h, w = size
    side = max(4, round(REGION_FRACTION * min(h, w)))
    rng = make_rng(seed, "attr")
    r0 = int(rng.integers(0, h - side + 1))
    c0 = int(rng.integers(0, w - side + 1))
    return r0, c0, side


def _attr_draws(seed: int, size: tuple[int, int]) -> dict:
    """All attribute randomness, drawn in fixed order independent of kind/magnitude."""
    h, w = size
    side = max(4, round(REGION_FRACTION * min(h, w)))
    rng = make_rng(seed, "attr")
    r0 = int(rng.integers(0, h - side + 1))
    c0 = int(rng.integers(0, w - side + 1))
    spots = rng.random((MAX_SPOTS, 3))  # (cy, cx, radius) in unit region coords
    stripe_angle = rng.random() * np.pi
    stripe_freq = 3.0 + 3.0 * rng.random()
    return {"r0": r0, "c0": c0, "side": side, "spots": spots, "stripe_angle": stripe_angle, "stripe_freq": stripe_freq}


def apply_attribute(img: np.ndarray, kind: str, magnitude: float, seed: int) -> np.ndarray:
    """Apply a local fine attribute; pixels outside the region are untouched."""
    if not 0.0 <= magnitude <= 1.0:
        raise ParameterError(f"attribute magnitude {magnitude} outside [0, 1]")
    if kind not in ATTRIBUTE_KINDS:
        raise ParameterError(f"unknown attribute kind '{kind}'")
    if magnitude == 0.0:
        return img.copy()

    h, w, _ = img.shape
    draws = _attr_draws(seed, (h, w))
    r0, c0, side = draws["r0"], draws["c0"], draws["side"]
    out = img.copy()
    patch = out[r0 : r0 + side, c0 : c0 + side, :]
    vv, uu = _grid(side, side)

    if kind == "spot_density":
        n = int(round(magnitude * MAX_SPOTS))
        color = np.array([0.38, 0.16, 0.08])
        for cy, cx, rad in draws["spots"][:n]:
            radius = (0.06 + 0.06 * rad) * side
            cyp, cxp = 0.1 + 0.8 * cy, 0.1 + 0.8 * cx
            d2 = ((vv - cyp) ** 2 + (uu - cxp) ** 2) * side**2
            mask = np.exp(-d2 / (radius**2))[:, :, None]
            patch += (color[None, None, :] - patch) * 0.85 * mask
    elif kind == "stripe_width":
        t = uu * np.cos(draws["stripe_angle"]) + vv * np.sin(draws["stripe_angle"])
        phase = (t * draws["stripe_freq"]) % 1.0
        mask = (phase < 0.55 * magnitude).astype(np.float64)[:, :, None]
        patch += (np.array([0.12, 0.10, 0.05])[None, None, :] - patch) * 0.8 * mask
    elif kind == "patch_color_shift":
        feather = np.clip(1.6 - 3.2 * np.sqrt((vv - 0.5) ** 2 + (uu - 0.5) ** 2), 0.0, 1.0)
        shift = magnitude * np.array([0.30, -0.18, 0.12])
        patch += feather[:, :, None] * shift[None, None, :]
    elif kind == "edge_curl":
        dist = np.minimum.reduce([vv, 1.0 - vv, uu, 1.0 - uu])
        band = np.exp(-((dist - 0.12) ** 2) / 0.005)
        patch += magnitude * 0.35 * band[:, :, None] * np.array([0.9, 0.8, 0.5])[None, None, :]

    out[r0 : r0 + side, c0 : c0 + side, :] = np.clip(patch, 0.0, 1.0)
    return out


def write_image(path: Path, img: np.ndarray) -> bytes:
    """Serialize (H, W, C) floats in [0, 1] to the IMG1 binary format.

    Returns the float32 payload bytes (the content-hash input).
    """
    img = np.asarray(img)
    if img.ndim != 3:
        raise ParameterError(f"expected (H, W, C) image, got shape {img.shape}")
    h, w, c = img.shape
    payload = np.ascontiguousarray(img, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<III", h, w, c))
        fh.write(payload)
    return payload


def read_image(path: Path) -> np.ndarray:
    """Load an IMG1 file as float64 (H, W, C)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != IMAGE_MAGIC:
        raise CheckpointFormatError(f"{path}: bad image magic {raw[:4]!r} at offset 0")
    h, w, c = struct.unpack_from("<III", raw, 4)
    expected = 16 + 4 * h * w * c
    if len(raw) != expected:
        raise CheckpointFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=16).reshape(h, w, c)
    return data.astype(np.float64)
