"""Versioned binary tensor container used for LM and detector checkpoints.

Layout:

    bytes 0..7    magic ``EVLTNSR\\0``
    bytes 8..11   format version, uint32 little-endian
    bytes 12..15  header length in bytes, uint32 little-endian
    header        UTF-8 ``key=value`` lines:
                      kind=<model kind>
                      config.<name>=<value>        (flat, stringified)
                      tensor.<i>=<name>:<d0>x<d1>  (declared order)
    payload       raw little-endian float32 tensors, C order, in the
                  declared order

The byte stream is fully deterministic for a given (kind, config, tensors)
triple, so identical training runs produce identical checkpoint files.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError, MissingCheckpointError

MAGIC = b"EVLTNSR\x00"
FORMAT_VERSION = 1


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_tensors(path, kind: str, config: dict, tensors: dict[str, np.ndarray]) -> None:
    """Write tensors (in dict order) plus a flat config header."""
    lines = [f"kind={kind}"]
    for key in sorted(config):
        lines.append(f"config.{key}={_format_value(config[key])}")
    blobs = []
    for i, (name, arr) in enumerate(tensors.items()):
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        shape = "x".join(str(d) for d in arr32.shape)
        lines.append(f"tensor.{i}={name}:{shape}")
        blobs.append(arr32.tobytes())
    header = ("\n".join(lines) + "\n").encode("utf-8")
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path) -> tuple[str, dict[str, str], dict[str, np.ndarray]]:
    """Read a container back: (kind, stringified config, float32 tensors)."""
    p = Path(path)
    if not p.is_file():
        raise MissingCheckpointError(f"checkpoint not found: {p}")
    raw = p.read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{p}: bad magic, not a tensor container")
    version, header_len = struct.unpack_from("<II", raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"{p}: unsupported format version {version}")
    header_start = len(MAGIC) + 8
    header = raw[header_start : header_start + header_len].decode("utf-8")

    kind = None
    config: dict[str, str] = {}
    order: list[tuple[int, str, tuple[int, ...]]] = []
    for line in header.splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        if key == "kind":
            kind = value
        elif key.startswith("config."):
            config[key[len("config."):]] = value
        elif key.startswith("tensor."):
            idx = int(key[len("tensor."):])
            name, _, shape_s = value.partition(":")
            shape = tuple(int(d) for d in shape_s.split("x")) if shape_s else ()
            order.append((idx, name, shape))
        else:
            raise CheckpointFormatError(f"{p}: unknown header key {key!r}")
    if kind is None:
        raise CheckpointFormatError(f"{p}: missing kind")

    order.sort()
    tensors: dict[str, np.ndarray] = {}
    offset = header_start + header_len
    for _, name, shape in order:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = 4 * count
        chunk = raw[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointFormatError(f"{p}: truncated tensor {name!r}")
        tensors[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).copy()
        offset += nbytes
    if offset != len(raw):
        raise CheckpointFormatError(f"{p}: {len(raw) - offset} trailing bytes")
    return kind, config, tensors


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
