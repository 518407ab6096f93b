"""Stage 1: in-batch contrastive training of the image and text encoders.

The per-row loss is the negative log-softmax of the positive pair's
similarity against all in-batch pairings; symmetric mode averages the
image-to-text and text-to-image directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import SampleRecord, encode_prompt
from .data import CorpusData, epoch_batches
from .encoders import (
    Encoder,
    EncoderConfig,
    encode_image_backward,
    encode_image_batch,
    encode_text_backward,
    encode_text_batch,
    init_params,
)
from .errors import ConfigurationError, ParameterError, TrainingError
from .numerics import AdamW, log_softmax_rows, softmax_rows
from .rng import derive_seed, make_rng

UNIT_ROW_TOL = 1e-6


@dataclass(frozen=True)
class ContrastiveConfig:
    batch_size: int = 32
    temperature: float = 0.07
    epochs: int = 10
    lr: float = 5e-4
    weight_decay: float = 0.04
    symmetric: bool = True
    seed: int = 0
    d_model: int = 64
    hidden_dim: int = 128
    d_out: int = 64
    patch_size: int = 8

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ConfigurationError("contrastive batch size must be >= 2")
        if self.temperature <= 0:
            raise ConfigurationError("temperature must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")


def clip_loss(
    U: np.ndarray,
    V: np.ndarray,
    temperature: float,
    symmetric: bool = True,
    validate: bool = True,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Contrastive loss over aligned unit-row batches; returns (loss, dU, dV)."""
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.shape != V.shape or U.ndim != 2:
        raise ParameterError(f"U and V must be matching 2-D batches, got {U.shape} and {V.shape}")
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    if validate:
        for name, M in (("U", U), ("V", V)):
            norms = np.linalg.norm(M, axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_ROW_TOL):
                raise ParameterError(f"{name} rows must be unit norm; normalize upstream")

    n = U.shape[0]
    sims = U @ V.T
    eye = np.eye(n)

    # image -> text: each row of sims is one image against all texts
    log_p_i2t = log_softmax_rows(sims, temperature)
    loss_i2t = -np.mean(np.diag(log_p_i2t))
    d_sims = (softmax_rows(sims, temperature) - eye) / (n * temperature)

    if symmetric:
        log_p_t2i = log_softmax_rows(sims.T, temperature)
        loss_t2i = -np.mean(np.diag(log_p_t2i))
        d_sims_t2i = (softmax_rows(sims.T, temperature) - eye) / (n * temperature)
        loss = 0.5 * (loss_i2t + loss_t2i)
        d_sims = 0.5 * (d_sims + d_sims_t2i.T)
    else:
        loss = loss_i2t

    dU = d_sims @ V
    dV = d_sims.T @ U
    return float(loss), dU, dV


def sample_batch(
    data: CorpusData,
    vocab: dict[str, int],
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, list[list[int]]]:
    """Draw n aligned (image, tokenized prompt) pairs without replacement."""
    if n > len(data):
        raise ConfigurationError(f"batch size {n} exceeds split size {len(data)}")
    idx = rng.choice(len(data), size=n, replace=False)
    images = data.images[idx]
    tokens = [_pick_prompt(data.records[i], vocab, rng) for i in idx]
    return images, tokens


def _pick_prompt(record: SampleRecord, vocab: dict[str, int], rng: np.random.Generator) -> list[int]:
    prompt = record.prompts[int(rng.integers(0, len(record.prompts)))]
    return encode_prompt(prompt, vocab)


def build_encoders(config: ContrastiveConfig, image_size: int, vocab_size: int) -> tuple[Encoder, Encoder]:
    img_cfg = EncoderConfig(
        kind="image",
        d_model=config.d_model,
        hidden_dim=config.hidden_dim,
        d_out=config.d_out,
        image_size=image_size,
        patch_size=config.patch_size,
        init_seed=derive_seed(config.seed, "img-init"),
    )
    txt_cfg = EncoderConfig(
        kind="text",
        d_model=config.d_model,
        hidden_dim=config.hidden_dim,
        d_out=config.d_out,
        vocab_size=vocab_size,
        init_seed=derive_seed(config.seed, "txt-init"),
    )
    return init_params(img_cfg), init_params(txt_cfg)


def train_contrastive(
    data: CorpusData,
    vocab: dict[str, int],
    config: ContrastiveConfig,
) -> tuple[Encoder, Encoder, list[float]]:
    """Train both encoders with AdamW; returns (image enc, text enc, per-epoch mean loss)."""
    config.validate()
    if len(data) < config.batch_size:
        raise ConfigurationError(
            f"train split has {len(data)} records, fewer than batch size {config.batch_size}"
        )
    image_size = data.images.shape[1]
    img_enc, txt_enc = build_encoders(config, image_size, vocab_size=max(vocab.values()) + 1)
    opt_img = AdamW(img_enc.params, lr=config.lr, weight_decay=config.weight_decay)
    opt_txt = AdamW(txt_enc.params, lr=config.lr, weight_decay=config.weight_decay)
    rng = make_rng(config.seed, "batches")

    history: list[float] = []
    for epoch in range(config.epochs):
        losses = []
        for step, idx in enumerate(epoch_batches(len(data), config.batch_size, rng)):
            images = data.images[idx]
            tokens = [_pick_prompt(data.records[i], vocab, rng) for i in idx]
            U, cache_img = encode_image_batch(img_enc, images)
            V, cache_txt = encode_text_batch(txt_enc, tokens)
            loss, dU, dV = clip_loss(U, V, config.temperature, config.symmetric)
            if not np.isfinite(loss):
                raise TrainingError(f"contrastive loss diverged at epoch {epoch}, step {step}")
            grads_img = encode_image_backward(img_enc, cache_img, dU)
            grads_txt = encode_text_backward(txt_enc, cache_txt, dV)
            opt_img.step(img_enc.params, grads_img)
            opt_txt.step(txt_enc.params, grads_txt)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return img_enc, txt_enc, history
