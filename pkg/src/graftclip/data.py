"""In-memory views of a built corpus for the training loops."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .corpus import SampleRecord, load_sample_image
from .errors import ConfigurationError


@dataclass
class CorpusData:
    """Records of one split with their images stacked in manifest order."""

    root: Path
    records: list[SampleRecord]
    images: np.ndarray  # (n, H, W, 3) float64

    def __len__(self) -> int:
        return len(self.records)


def load_split(corpus_dir: Path, records: Sequence[SampleRecord], split: str) -> CorpusData:
    chosen = [r for r in records if r.split == split]
    if not chosen:
        raise ConfigurationError(f"split '{split}' has no records")
    images = np.stack([load_sample_image(corpus_dir, r) for r in chosen])
    return CorpusData(root=Path(corpus_dir), records=chosen, images=images)


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Index batches covering a fresh permutation exactly once per epoch.

    A trailing remainder of one record is folded into the final batch so
    every batch has at least two rows.
    """
    if batch_size < 2:
        raise ConfigurationError("batch_size must be >= 2")
    order = rng.permutation(n)
    starts = list(range(0, n, batch_size))
    if len(starts) > 1 and n - starts[-1] == 1:
        starts.pop()
    for i, start in enumerate(starts):
        stop = starts[i + 1] if i + 1 < len(starts) else n
        yield order[start:stop]
