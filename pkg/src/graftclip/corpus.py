"""Synthetic image-text corpus: class defs, prompt templating, build, vocabulary.

A corpus is a pure function of its spec: rebuilding with the same spec
yields byte-identical images, manifest, and vocabulary. Per-sample seeds
are derived from (master seed, dataset, class, index), so enlarging
images_per_class appends new samples without changing existing ones, and
the eval split is the index *prefix* of every class so larger builds never
pull a smaller build's eval images into their train split.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import imaging
from .errors import ConfigurationError, DataIntegrityError
from .rng import content_hash64, derive_seed, make_rng

PROMPT_MODES = ("generic", "custom")
SPLITS = ("train", "eval")

PAD_TOKEN = "<pad>"
OOV_TOKEN = "<oov>"


@dataclass(frozen=True)
class ClassDef:
    class_id: int
    class_name: str
    dataset_name: str
    base_pattern: str
    attribute_kind: str
    attribute_magnitude: float
    attribute_phrase: str


@dataclass(frozen=True)
class CorpusSpec:
    classes: tuple[ClassDef, ...]
    images_per_class: int = 200
    image_size: int = 64
    eval_fraction: float = 0.2
    prompt_mode: str = "custom"
    prompts_per_image: int = 4
    master_seed: int = 0
    held_out_datasets: tuple[str, ...] = ()

    def validate(self) -> None:
        if len(self.classes) < 2:
            raise ConfigurationError("corpus needs at least 2 classes")
        if self.images_per_class < 1:
            raise ConfigurationError("images_per_class must be positive")
        if self.image_size < 32:
            raise ConfigurationError("image_size must be at least 32")
        if not 0.0 < self.eval_fraction < 1.0:
            raise ConfigurationError("eval_fraction must be in (0, 1)")
        if self.prompt_mode not in PROMPT_MODES:
            raise ConfigurationError(f"prompt_mode must be one of {PROMPT_MODES}")
        if self.prompts_per_image < 1:
            raise ConfigurationError("prompts_per_image must be positive")
        seen: set[tuple[str, int]] = set()
        names = {c.dataset_name for c in self.classes}
        for c in self.classes:
            key = (c.dataset_name, c.class_id)
            if key in seen:
                raise ConfigurationError(f"duplicate class_id {c.class_id} in dataset '{c.dataset_name}'")
            seen.add(key)
            if c.base_pattern not in imaging.PATTERN_FAMILIES:
                raise ConfigurationError(f"unknown base pattern '{c.base_pattern}'")
            if c.attribute_kind not in imaging.ATTRIBUTE_KINDS:
                raise ConfigurationError(f"unknown attribute kind '{c.attribute_kind}'")
            if not 0.0 <= c.attribute_magnitude <= 1.0:
                raise ConfigurationError("attribute magnitude must be in [0, 1]")
            if self.prompt_mode == "custom" and not c.attribute_phrase:
                raise ConfigurationError(f"class '{c.class_name}' lacks an attribute phrase (custom mode)")
        for name in self.held_out_datasets:
            if name not in names:
                raise ConfigurationError(f"held-out dataset '{name}' has no classes")
        if not [c for c in self.classes if c.dataset_name not in self.held_out_datasets]:
            raise ConfigurationError("every dataset is held out; nothing to train on")
        if not self.sibling_pairs():
            raise ConfigurationError(
                "corpus needs at least one pair of classes sharing a base pattern "
                "and differing only in the fine attribute"
            )

    def sibling_pairs(self) -> list[tuple[ClassDef, ClassDef]]:
        pairs = []
        for i, a in enumerate(self.classes):
            for b in self.classes[i + 1 :]:
                same_base = a.dataset_name == b.dataset_name and a.base_pattern == b.base_pattern
                differ = (a.attribute_kind, a.attribute_magnitude) != (b.attribute_kind, b.attribute_magnitude)
                if same_base and differ:
                    pairs.append((a, b))
        return pairs


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    image_ref: str
    dataset_name: str
    class_id: int
    class_name: str
    split: str
    prompts: tuple[str, ...]
    content_hash: str


def render_sample(class_def: ClassDef, per_sample_seed: int, size: tuple[int, int]) -> np.ndarray:
    """Render one class instance; deterministic in (class_def, seed)."""
    base = imaging.render_base(class_def.base_pattern, per_sample_seed, size)
    return imaging.apply_attribute(
        base, class_def.attribute_kind, class_def.attribute_magnitude, per_sample_seed
    )


_GENERIC_TEMPLATES = (
    "a photo of a {name}",
    "an image of a {name}",
    "a close-up of a {name}",
    "a picture of a {name}",
    "a cropped photo of a {name}",
    "a bright photo of a {name}",
    "a photo of the {name}",
    "a snapshot of a {name}",
)

_CUSTOM_TEMPLATES = (
    "a photo of a {name}, characterized by {phrase}",
    "an image of a {name} with {phrase}",
    "a close-up of a {name} showing {phrase}",
    "a picture of a {name}, {phrase} clearly visible",
    "a cropped photo of a {name} with {phrase}",
    "a detailed view of a {name} marked by {phrase}",
    "a photo of the {name}, {phrase}",
    "a field shot of a {name} displaying {phrase}",
)


def generate_prompts(class_def: ClassDef, mode: str, k: int, seed: int) -> list[str]:
    """k pairwise-distinct prompt texts; the canonical template always leads."""
    if mode not in PROMPT_MODES:
        raise ConfigurationError(f"unknown prompt mode '{mode}'")
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if mode == "custom":
        if not class_def.attribute_phrase:
            raise ConfigurationError(f"class '{class_def.class_name}' has no attribute phrase")
        pool = [
            t.format(name=class_def.class_name, phrase=class_def.attribute_phrase)
            for t in _CUSTOM_TEMPLATES
        ]
    else:
        pool = [t.format(name=class_def.class_name) for t in _GENERIC_TEMPLATES]
    if k > len(pool):
        raise ConfigurationError(f"k={k} exceeds the {len(pool)} available prompt variants")
    rng = make_rng(seed, "prompt-pick")
    rest = list(rng.permutation(len(pool) - 1) + 1)
    return [pool[0]] + [pool[i] for i in rest[: k - 1]]


def _split_for(index: int, n_eval: int, held_out: bool) -> str:
    if held_out:
        return "eval"
    return "eval" if index < n_eval else "train"


def build_corpus(spec: CorpusSpec, output_dir: Path) -> list[SampleRecord]:
    """Render all images, write them plus manifest/spec files, return records."""
    spec.validate()
    output_dir = Path(output_dir)
    image_dir = output_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)

    n_eval = round(spec.images_per_class * spec.eval_fraction)
    size = (spec.image_size, spec.image_size)
    records: list[SampleRecord] = []
    for class_def in spec.classes:
        held_out = class_def.dataset_name in spec.held_out_datasets
        for index in range(spec.images_per_class):
            sample_seed = derive_seed(
                spec.master_seed, class_def.dataset_name, class_def.class_id, index
            )
            img = render_sample(class_def, sample_seed, size)
            name = f"{class_def.dataset_name}-{class_def.class_id:02d}-{index:05d}.img"
            try:
                payload = imaging.write_image(image_dir / name, img)
            except OSError as exc:
                raise OSError(f"failed writing image {image_dir / name}: {exc}") from exc
            prompts = generate_prompts(
                class_def,
                spec.prompt_mode,
                spec.prompts_per_image,
                derive_seed(spec.master_seed, "prompts", class_def.dataset_name, class_def.class_id, index),
            )
            records.append(
                SampleRecord(
                    sample_id=f"{class_def.dataset_name}-{class_def.class_id:02d}-{index:05d}",
                    image_ref=f"images/{name}",
                    dataset_name=class_def.dataset_name,
                    class_id=class_def.class_id,
                    class_name=class_def.class_name,
                    split=_split_for(index, n_eval, held_out),
                    prompts=tuple(prompts),
                    content_hash=content_hash64(payload),
                )
            )
    assert_split_disjoint(records)
    save_manifest(records, output_dir / "manifest.jsonl")
    save_corpus_spec(spec, output_dir / "corpus_spec.json")
    return records


def assert_split_disjoint(records: Sequence[SampleRecord]) -> None:
    train = {r.content_hash for r in records if r.split == "train"}
    overlap = [r for r in records if r.split == "eval" and r.content_hash in train]
    if overlap:
        raise DataIntegrityError(
            f"{len(overlap)} eval image(s) duplicate train content, e.g. {overlap[0].sample_id}"
        )


def save_manifest(records: Sequence[SampleRecord], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            row = {
                "sample_id": r.sample_id,
                "image_ref": r.image_ref,
                "dataset_name": r.dataset_name,
                "class_id": r.class_id,
                "class_name": r.class_name,
                "split": r.split,
                "prompts": list(r.prompts),
                "content_hash": r.content_hash,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_manifest(path: Path) -> list[SampleRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataIntegrityError(f"{path}:{lineno}: bad manifest line: {exc}") from exc
            if row["split"] not in SPLITS:
                raise DataIntegrityError(f"{path}:{lineno}: unknown split '{row['split']}'")
            if not row["prompts"]:
                raise DataIntegrityError(f"{path}:{lineno}: record has no prompts")
            records.append(
                SampleRecord(
                    sample_id=row["sample_id"],
                    image_ref=row["image_ref"],
                    dataset_name=row["dataset_name"],
                    class_id=int(row["class_id"]),
                    class_name=row["class_name"],
                    split=row["split"],
                    prompts=tuple(row["prompts"]),
                    content_hash=row["content_hash"],
                )
            )
    assert_split_disjoint(records)
    return records


def split_records(records: Iterable[SampleRecord], split: str) -> list[SampleRecord]:
    if split not in SPLITS:
        raise ConfigurationError(f"unknown split '{split}'")
    return [r for r in records if r.split == split]


def load_sample_image(corpus_dir: Path, record: SampleRecord) -> np.ndarray:
    """Read a record's image and verify its content hash."""
    path = Path(corpus_dir) / record.image_ref
    try:
        img = imaging.read_image(path)
    except OSError as exc:
        raise OSError(f"sample {record.sample_id}: cannot read {path}: {exc}") from exc
    payload = np.ascontiguousarray(img, dtype="<f4").tobytes()
    if content_hash64(payload) != record.content_hash:
        raise DataIntegrityError(f"sample {record.sample_id}: content hash mismatch for {path}")
    return img


# ---------------------------------------------------------------------------
# Vocabulary

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def build_vocab(records: Sequence[SampleRecord]) -> dict[str, int]:
    """Token -> id map; PAD=0 and OOV=1 reserved, rest sorted lexicographically."""
    tokens: set[str] = set()
    for r in records:
        for prompt in r.prompts:
            tokens.update(tokenize(prompt))
    if not tokens:
        raise ConfigurationError("no prompts to build a vocabulary from")
    vocab = {PAD_TOKEN: 0, OOV_TOKEN: 1}
    for i, tok in enumerate(sorted(tokens), start=2):
        vocab[tok] = i
    return vocab


def encode_prompt(text: str, vocab: dict[str, int]) -> list[int]:
    return [vocab.get(tok, 1) for tok in tokenize(text)]


def save_vocab(vocab: dict[str, int], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok, idx in sorted(vocab.items(), key=lambda kv: kv[1]):
            fh.write(f"{tok}\t{idx}\n")


def load_vocab(path: Path) -> dict[str, int]:
    vocab: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                tok, idx = line.rstrip("\n").split("\t")
                vocab[tok] = int(idx)
    return vocab


# ---------------------------------------------------------------------------
# Spec serialization and the default class preset

def save_corpus_spec(spec: CorpusSpec, path: Path) -> None:
    doc = asdict(spec)
    doc["classes"] = [asdict(c) for c in spec.classes]
    doc["held_out_datasets"] = list(spec.held_out_datasets)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_corpus_spec(path: Path) -> CorpusSpec:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    classes = tuple(ClassDef(**c) for c in doc["classes"])
    return CorpusSpec(
        classes=classes,
        images_per_class=doc["images_per_class"],
        image_size=doc["image_size"],
        eval_fraction=doc["eval_fraction"],
        prompt_mode=doc["prompt_mode"],
        prompts_per_image=doc["prompts_per_image"],
        master_seed=doc["master_seed"],
        held_out_datasets=tuple(doc["held_out_datasets"]),
    )


def default_classes() -> tuple[ClassDef, ...]:
    """Built-in preset: 8 coarse classes, one fine-grained sibling pair,
    and a held-out 2-class dataset whose names never occur in training."""
    main = [
        ("wheat rust", "stripes", "stripe_width", 0.6, "rust colored streaks across golden stalks"),
        ("boron deficient leaf", "leaf", "patch_color_shift", 0.7, "yellow patches and curled edges"),
        ("river carp", "scales", "spot_density", 0.5, "glinting silver scales and a blunt snout"),
        ("highland sheep", "fur", "edge_curl", 0.5, "thick curly fleece and a dark muzzle"),
        ("orchard soil", "speckle", "patch_color_shift", 0.5, "pale gritty flecks in dark loam"),
        ("paddy water", "waves", "stripe_width", 0.5, "green rippled rows under shallow water"),
        ("trellis vine", "grid", "spot_density", 0.5, "woody lattice with clustered buds"),
        ("dahlia bloom", "rosette", "edge_curl", 0.6, "layered petals around a bright core"),
    ]
    siblings = [
        ("leafblight mild", "blotch", "spot_density", 0.25, "sparse brown spots on the blade"),
        ("leafblight severe", "blotch", "spot_density", 0.85, "dense brown spots covering the blade"),
    ]
    unseen = [
        ("pond weed mat", "ripple", "patch_color_shift", 0.6, "pale concentric rings with yellow patches"),
        ("mudflat carp", "blotch", "spot_density", 0.6, "dense brown spots over a silver body"),
    ]
    classes = []
    for i, (name, pattern, kind, mag, phrase) in enumerate(main):
        classes.append(ClassDef(i, name, "cropmix", pattern, kind, mag, phrase))
    for i, (name, pattern, kind, mag, phrase) in enumerate(siblings):
        classes.append(ClassDef(i, name, "leafblight", pattern, kind, mag, phrase))
    for i, (name, pattern, kind, mag, phrase) in enumerate(unseen):
        classes.append(ClassDef(i, name, "newpond", pattern, kind, mag, phrase))
    return tuple(classes)


def default_corpus_spec(master_seed: int = 0, **overrides) -> CorpusSpec:
    spec = CorpusSpec(
        classes=default_classes(),
        master_seed=master_seed,
        held_out_datasets=("newpond",),
    )
    if overrides:
        spec = CorpusSpec(**{**asdict_spec(spec), **overrides})
    return spec


def asdict_spec(spec: CorpusSpec) -> dict:
    return {
        "classes": spec.classes,
        "images_per_class": spec.images_per_class,
        "image_size": spec.image_size,
        "eval_fraction": spec.eval_fraction,
        "prompt_mode": spec.prompt_mode,
        "prompts_per_image": spec.prompts_per_image,
        "master_seed": spec.master_seed,
        "held_out_datasets": spec.held_out_datasets,
    }
