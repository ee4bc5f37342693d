"""Input validation helpers used across estimators and attack code."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import EmptyInputError

_BYTES_LIKE = (bytes, bytearray, memoryview)


def as_bytes(data, *, allow_empty: bool = False, name: str = "data") -> bytes:
    """Coerce ``data`` to an immutable ``bytes`` object.

    Accepts bytes-like objects and 1-D uint8 arrays; anything else is a
    TypeError. Raises :class:`EmptyInputError` on empty input unless
    ``allow_empty`` is set.
    """
    if isinstance(data, _BYTES_LIKE):
        out = bytes(data)
    elif isinstance(data, np.ndarray):
        if data.dtype != np.uint8 or data.ndim != 1:
            raise TypeError(f"{name} array must be 1-D uint8, got {data.dtype} ndim={data.ndim}")
        out = data.tobytes()
    else:
        raise TypeError(f"{name} must be bytes-like or a uint8 array, got {type(data).__name__}")
    if not out and not allow_empty:
        raise EmptyInputError(f"{name} must be non-empty")
    return out


def as_byte_array(data, *, allow_empty: bool = False, name: str = "data") -> np.ndarray:
    """Coerce ``data`` to a 1-D uint8 array (zero-copy where possible)."""
    if isinstance(data, np.ndarray) and data.dtype == np.uint8 and data.ndim == 1:
        if data.size == 0 and not allow_empty:
            raise EmptyInputError(f"{name} must be non-empty")
        return data
    raw = as_bytes(data, allow_empty=allow_empty, name=name)
    return np.frombuffer(raw, dtype=np.uint8)


def check_corpus(corpus, *, name: str = "corpus") -> list[bytes]:
    """Validate a corpus: a non-empty sequence of non-empty byte strings."""
    from .errors import EmptyCorpusError

    items = list(corpus)
    if not items:
        raise EmptyCorpusError(f"{name} must contain at least one sample")
    return [as_bytes(item, name=f"{name}[{i}]") for i, item in enumerate(items)]


def content_seed_words(data: bytes) -> tuple[int, ...]:
    """Stable 128-bit digest of ``data`` as four uint32 words.

    Used to derive per-sample RNG streams that depend only on sample
    content, so batched and one-at-a-time attack runs draw identical noise.
    """
    digest = hashlib.blake2b(data, digest_size=16).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def spawn_rng(seed: int, data: bytes | None = None) -> np.random.Generator:
    """Seeded generator, optionally bound to the content of ``data``."""
    if data is None:
        entropy: tuple[int, ...] = (int(seed),)
    else:
        entropy = (int(seed), *content_seed_words(data))
    return np.random.default_rng(np.random.SeedSequence(entropy))
