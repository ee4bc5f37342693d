"""Corpus manifests and the self-contained synthetic testbed.

The synthetic corpus stands in for a real benign/malware file collection.
It is engineered, not realistic: benign files are mostly printable-text
segments with occasional high-byte noise runs, while malicious files draw
from a shared high-byte distribution plus a small per-category signature
band. Both classes therefore contain high-byte content, but only benign
files contain long text-like runs, which keeps the classes separable by
byte statistics while leaving the classifier attackable through appended
benign-looking bytes. Category file sizes differ deliberately: dropper
and virus files are small, backdoor and ransomware files large, so the
fixed append cap matters more for the small categories.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

import numpy as np

from ..binfile import BinarySample, parse_sample
from ..errors import EmptyManifestError, IoFailureError
from .categories import CATEGORY_NAMES, check_category

MANIFEST_FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

LABEL_BENIGN = "benign"
LABEL_MALICIOUS = "malicious"

_DOS_HEADER = b"MZ\x90\x00"


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # posix path relative to the manifest location
    sample_id: str
    label: str
    category: str | None = None

    def to_dict(self) -> dict:
        return {"path": self.path, "sample_id": self.sample_id,
                "label": self.label, "category": self.category}


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]
    format_version: int = MANIFEST_FORMAT_VERSION

    def __post_init__(self) -> None:
        ids = [e.sample_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest sample_ids must be unique")
        for e in self.entries:
            if e.label not in (LABEL_BENIGN, LABEL_MALICIOUS):
                raise ValueError(f"bad label {e.label!r} for {e.sample_id}")
            if e.label == LABEL_MALICIOUS:
                if e.category is None:
                    raise ValueError(f"malicious entry {e.sample_id} lacks a category")
                check_category(e.category)

    def benign(self) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.label == LABEL_BENIGN)

    def malicious(self) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.label == LABEL_MALICIOUS)

    def to_dict(self) -> dict:
        return {"format_version": self.format_version,
                "entries": [e.to_dict() for e in self.entries]}

    def save(self, path) -> None:
        payload = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        Path(path).write_text(payload, encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if "format_version" not in raw:
            raise ValueError(f"{path}: manifest missing format_version")
        version = int(raw["format_version"])
        if version != MANIFEST_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported manifest version {version}")
        entries = tuple(ManifestEntry(path=e["path"], sample_id=e["sample_id"],
                                      label=e["label"], category=e.get("category"))
                        for e in raw["entries"])
        return cls(entries=entries, format_version=version)


def load_binary_samples(manifest: CorpusManifest, root, label: str | None = None
                        ) -> list[BinarySample]:
    """Read manifest entries (optionally one label) as parsed samples."""
    rootp = Path(root)
    wanted = [e for e in manifest.entries if label is None or e.label == label]
    if not wanted:
        raise EmptyManifestError(f"manifest holds no entries with label={label!r}")
    return [parse_sample((rootp / e.path).read_bytes(), e.sample_id, category=e.category)
            for e in wanted]


def _default_category_counts() -> dict[str, int]:
    return {name: 40 for name in CATEGORY_NAMES}


def default_category_length_ranges() -> dict[str, tuple[int, int]]:
    return {
        "adware": (8192, 24576),
        "backdoor": (24576, 49152),
        "botnet": (8192, 24576),
        "dropper": (2048, 8192),
        "ransomware": (24576, 49152),
        "rootkit": (4096, 16384),
        "spyware": (8192, 24576),
        "virus": (2048, 8192),
    }


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """Knobs for the generated testbed.

    ``min_histogram_divergence`` documents the engineered separability
    floor: the L1 distance between the benign mean byte histogram and
    each malicious category's mean histogram is expected to clear it.
    """

    num_benign: int = 64
    malicious_per_category: dict[str, int] = field(default_factory=_default_category_counts)
    benign_length_range: tuple[int, int] = (4096, 32768)
    category_length_ranges: dict[str, tuple[int, int]] = field(default_factory=default_category_length_ranges)
    benign_noise_fraction: float = 0.2
    signature_mass: float = 0.1
    min_histogram_divergence: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_benign < 0:
            raise ValueError("num_benign must be >= 0")
        for name, count in self.malicious_per_category.items():
            check_category(name)
            if count < 0:
                raise ValueError(f"negative count for category {name}")
        for lo, hi in (self.benign_length_range, *self.category_length_ranges.values()):
            if lo < len(_DOS_HEADER) or hi < lo:
                raise ValueError("length ranges must satisfy 4 <= lo <= hi")
        if not 0.0 <= self.benign_noise_fraction < 1.0:
            raise ValueError("benign_noise_fraction must be in [0, 1)")
        if not 0.0 < self.signature_mass < 1.0:
            raise ValueError("signature_mass must be in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "num_benign": self.num_benign,
            "malicious_per_category": dict(self.malicious_per_category),
            "benign_length_range": list(self.benign_length_range),
            "category_length_ranges": {k: list(v) for k, v in
                                       sorted(self.category_length_ranges.items())},
            "benign_noise_fraction": self.benign_noise_fraction,
            "signature_mass": self.signature_mass,
            "min_histogram_divergence": self.min_histogram_divergence,
            "seed": self.seed,
        }


def _text_distribution() -> np.ndarray:
    w = np.full(256, 0.02)
    w[0x20:0x7F] = 1.0
    w[0x00] = 8.0
    for b in (0x09, 0x0A, 0x0D):
        w[b] = 2.0
    return w / w.sum()


def _noise_distribution() -> np.ndarray:
    w = np.zeros(256)
    w[0x80:] = 1.0
    return w / w.sum()


def _category_distribution(index: int, signature_mass: float) -> np.ndarray:
    band = np.zeros(256)
    start = 0x80 + 16 * index
    band[start:start + 16] = 1.0
    band /= band.sum()
    return (1.0 - signature_mass) * _noise_distribution() + signature_mass * band


def _benign_body(rng: np.random.Generator, length: int, noise_fraction: float) -> bytes:
    text, noise = _text_distribution(), _noise_distribution()
    parts, total = [], 0
    while total < length:
        if rng.random() < noise_fraction:
            seg_len, dist = int(rng.integers(512, 2049)), noise
        else:
            seg_len, dist = int(rng.integers(1024, 4097)), text
        seg = rng.choice(256, size=min(seg_len, length - total), p=dist)
        parts.append(seg.astype(np.uint8))
        total += seg.shape[0]
    return np.concatenate(parts).tobytes()


def generate_synthetic_corpus(spec: SyntheticCorpusSpec, out_dir) -> CorpusManifest:
    """Write the synthetic corpus plus its manifest; returns the manifest.

    Fully deterministic for a given spec (including the seed): rerunning
    yields byte-identical files and manifest.
    """
    out = Path(out_dir)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    entries: list[ManifestEntry] = []
    try:
        benign_dir = out / "benign"
        benign_dir.mkdir(parents=True, exist_ok=True)
        lo, hi = spec.benign_length_range
        for i in range(spec.num_benign):
            target = int(rng.integers(lo, hi + 1))
            body = _benign_body(rng, target - len(_DOS_HEADER), spec.benign_noise_fraction)
            rel = PurePosixPath("benign") / f"benign_{i:04d}.bin"
            (out / rel).write_bytes(_DOS_HEADER + body)
            entries.append(ManifestEntry(path=str(rel), sample_id=f"benign_{i:04d}",
                                         label=LABEL_BENIGN))
        for cat_index, name in enumerate(CATEGORY_NAMES):
            count = spec.malicious_per_category.get(name, 0)
            if count == 0:
                continue
            cat_dir = out / "malicious" / name
            cat_dir.mkdir(parents=True, exist_ok=True)
            dist = _category_distribution(cat_index, spec.signature_mass)
            lo, hi = spec.category_length_ranges.get(name, (4096, 16384))
            for i in range(count):
                target = int(rng.integers(lo, hi + 1))
                body = rng.choice(256, size=target - len(_DOS_HEADER), p=dist)
                rel = PurePosixPath("malicious") / name / f"{name}_{i:04d}.bin"
                (out / rel).write_bytes(_DOS_HEADER + body.astype(np.uint8).tobytes())
                entries.append(ManifestEntry(path=str(rel), sample_id=f"{name}_{i:04d}",
                                             label=LABEL_MALICIOUS, category=name))
        manifest = CorpusManifest(entries=tuple(entries))
        manifest.save(out / MANIFEST_NAME)
    except OSError as exc:
        raise IoFailureError(f"failed writing corpus under {out}: {exc}") from exc
    return manifest


def byte_histogram(data: bytes) -> np.ndarray:
    arr = np.frombuffer(data, dtype=np.uint8)
    return np.bincount(arr, minlength=256) / max(arr.shape[0], 1)


def class_histogram_divergence(manifest: CorpusManifest, root) -> dict[str, float]:
    """L1 distance between benign and per-category mean byte histograms."""
    rootp = Path(root)
    hists: dict[str, list[np.ndarray]] = {}
    for e in manifest.entries:
        key = LABEL_BENIGN if e.label == LABEL_BENIGN else e.category
        hists.setdefault(key, []).append(byte_histogram((rootp / e.path).read_bytes()))
    if LABEL_BENIGN not in hists:
        raise EmptyManifestError("manifest holds no benign entries")
    benign_mean = np.mean(hists.pop(LABEL_BENIGN), axis=0)
    return {cat: float(np.abs(benign_mean - np.mean(h, axis=0)).sum())
            for cat, h in sorted(hists.items())}
