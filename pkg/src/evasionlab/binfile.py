"""Executable container parsing and size-capped end-of-file appends.

Only the two-byte DOS magic is inspected: appended overlay bytes are never
loaded by the executable loader, so for append-only edits a static prefix
check is a sufficient functionality predicate. No section tables are
parsed and no disassembly happens here.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyInputError, PayloadTooLargeError
from .threat import ThreatModel
from .validation import as_bytes

PE_LIKE = "pe_like"
RAW = "raw"

DOS_MAGIC = b"MZ"


@dataclass(frozen=True)
class BinarySample:
    """An opaque parsed binary: raw bytes plus a shallow format tag."""

    sample_id: str
    data: bytes
    format: str
    category: str | None = None

    @property
    def length(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class PerturbedSample:
    """A sample with an appended payload.

    ``combined`` is materialised at construction so post-hoc tampering is
    detectable by :func:`verify_integrity`.
    """

    base: BinarySample
    payload: bytes
    combined: bytes

    @property
    def combined_length(self) -> int:
        return len(self.combined)


def parse_sample(raw, sample_id: str, category: str | None = None) -> BinarySample:
    """Wrap raw bytes as a :class:`BinarySample`.

    Format is ``pe_like`` iff the first two bytes are the DOS magic
    ``MZ``; everything else is ``raw``. The bytes are never modified.
    """
    data = as_bytes(raw, name="raw")
    fmt = PE_LIKE if data[:2] == DOS_MAGIC else RAW
    return BinarySample(sample_id=sample_id, data=data, format=fmt, category=category)


def read_sample(path, sample_id: str | None = None, category: str | None = None) -> BinarySample:
    """Read a file from disk as an opaque byte stream and parse it."""
    p = Path(path)
    data = p.read_bytes()
    if not data:
        raise EmptyInputError(f"{p} is empty")
    return parse_sample(data, sample_id=sample_id or p.stem, category=category)


def append_payload(sample: BinarySample, payload, model: ThreatModel) -> PerturbedSample:
    """Append ``payload`` at end of file, enforcing the threat-model cap.

    Oversized payloads abort the attack via :class:`PayloadTooLargeError`;
    they are never silently truncated.
    """
    payload_bytes = as_bytes(payload, allow_empty=True, name="payload")
    if len(payload_bytes) > model.max_append_bytes:
        raise PayloadTooLargeError(
            f"payload of {len(payload_bytes)} bytes exceeds cap of "
            f"{model.max_append_bytes} bytes"
        )
    return PerturbedSample(
        base=sample,
        payload=payload_bytes,
        combined=sample.data + payload_bytes,
    )


def verify_integrity(perturbed: PerturbedSample) -> bool:
    """Static functionality predicate for append-only edits.

    True iff the original bytes survive bit-exactly as a prefix of the
    combined sequence and, for pe_like bases, the DOS magic is intact.
    Returns False rather than raising.
    """
    base = perturbed.base
    if len(perturbed.combined) < base.length:
        return False
    if perturbed.combined[: base.length] != base.data:
        return False
    if base.format == PE_LIKE and perturbed.combined[:2] != DOS_MAGIC:
        return False
    return True
