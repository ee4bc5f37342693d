"""Seeded temperature / top-k sampling and append-payload generation.

Decoding runs batched with a KV cache. Each sequence owns an RNG stream
derived from (seed, prefix content), and consumes exactly one uniform draw
per sampled token, so one-at-a-time and batched generation emit identical
payloads and a payload never depends on which other samples share the
batch. When the cache fills the window is refreshed to the most recent
``context_len // 2`` tokens (learned absolute positions make a true
sliding window impractical), so the effective conditioning window
oscillates between half and full context.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyPrefixError
from ..threat import MAX_APPEND_BYTES
from ..validation import as_bytes, spawn_rng
from .model import LMConfig, lm_decode_step, lm_prefill
from .tokenizer import TOKEN_VOCAB_SIZE, tokenize, tokens_to_bytes

_BLOCK = 256  # sub-block width for the two-level inverse-CDF sampler


@dataclass(frozen=True)
class SamplerConfig:
    """Decoding knobs. ``temperature == 0.0`` is the flagged greedy mode."""

    temperature: float = 1.0
    top_k: int | None = None
    max_payload_bytes: int = MAX_APPEND_BYTES
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0 (0 selects greedy decoding)")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1 or None for the full vocabulary")
        if self.max_payload_bytes < 0:
            raise ValueError("max_payload_bytes must be >= 0")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_k": self.top_k,
            "max_payload_bytes": self.max_payload_bytes,
            "seed": self.seed,
        }


def sample_next_tokens(logits: np.ndarray, temperature: float, top_k: int | None,
                       rngs: Sequence[np.random.Generator]) -> np.ndarray:
    """Draw one token per row from softmax(logits / temperature).

    Consumes exactly one uniform per row (none in greedy mode).
    """
    B, V = logits.shape
    if temperature == 0.0:
        return np.argmax(logits, axis=1).astype(np.int64)

    scaled = logits / temperature
    if top_k is not None and top_k < V:
        keep = np.argpartition(scaled, V - top_k, axis=1)[:, V - top_k:]
        vals = np.take_along_axis(scaled, keep, axis=1)
        w = np.exp(vals - vals.max(axis=1, keepdims=True))
        cum = np.cumsum(w, axis=1, dtype=np.float64)
        out = np.empty(B, dtype=np.int64)
        for r in range(B):
            target = rngs[r].random() * cum[r, -1]
            j = min(int(np.searchsorted(cum[r], target, side="right")), top_k - 1)
            out[r] = keep[r, j]
        return out

    # full-vocabulary path: exponentiate once, then a two-level CDF walk
    # (block sums first) instead of a full-width cumsum
    w = np.exp(scaled - scaled.max(axis=1, keepdims=True))
    u = np.fromiter((rng.random() for rng in rngs), dtype=np.float64, count=B)
    if V % _BLOCK:
        cum = np.cumsum(w, axis=1, dtype=np.float64)
        idx = (cum <= (u * cum[:, -1])[:, None]).sum(axis=1)
        return np.minimum(idx, V - 1).astype(np.int64)

    nb = V // _BLOCK
    rows = np.arange(B)
    block_sums = w.reshape(B, nb, _BLOCK).sum(axis=2, dtype=np.float64)
    cum_blocks = np.cumsum(block_sums, axis=1)
    target = u * cum_blocks[:, -1]
    bidx = np.minimum((cum_blocks <= target[:, None]).sum(axis=1), nb - 1)
    prev = np.where(bidx > 0, cum_blocks[rows, np.maximum(bidx - 1, 0)], 0.0)
    residual = target - prev
    cols = bidx[:, None] * _BLOCK + np.arange(_BLOCK)
    inner = np.cumsum(w[rows[:, None], cols], axis=1, dtype=np.float64)
    off = np.minimum((inner <= residual[:, None]).sum(axis=1), _BLOCK - 1)
    return (bidx * _BLOCK + off).astype(np.int64)


def _generate_group(params, config: LMConfig, sampler: SamplerConfig,
                    windows: np.ndarray, rngs, n_tokens: int) -> np.ndarray:
    keep = max(1, config.context_len // 2)
    out = np.empty((windows.shape[0], n_tokens), dtype=np.int64)
    state, logits = lm_prefill(params, config, windows)
    for step in range(n_tokens):
        toks = sample_next_tokens(logits, sampler.temperature, sampler.top_k, rngs)
        out[:, step] = toks
        if step == n_tokens - 1:
            break
        if state.length >= config.context_len:
            tail = np.concatenate([windows, out[:, : step + 1]], axis=1)[:, -keep:]
            state, logits = lm_prefill(params, config, tail)
        else:
            logits = lm_decode_step(params, config, state, toks)
    return out


def generate_payload_batch(params, config: LMConfig, sampler: SamplerConfig,
                           prefixes: Sequence) -> list[bytes]:
    """File-conditioned payloads for a batch of prefixes.

    Each prefix conditions on its own last ``context_len - 1`` tokens; the
    payload length is the largest even count within ``max_payload_bytes``.
    """
    if config.vocab_size != TOKEN_VOCAB_SIZE:
        raise ValueError("byte generation requires the full two-byte vocabulary")
    prefix_bytes = []
    for i, prefix in enumerate(prefixes):
        data = as_bytes(prefix, allow_empty=True, name=f"prefix[{i}]")
        if not data:
            raise EmptyPrefixError("generation prefix must be non-empty")
        prefix_bytes.append(data)

    n_tokens = sampler.max_payload_bytes // 2
    if n_tokens == 0 or not prefix_bytes:
        return [b"" for _ in prefix_bytes]

    windows = [tokenize(p).tokens[-(config.context_len - 1):] for p in prefix_bytes]
    rngs = [spawn_rng(sampler.seed, p) for p in prefix_bytes]

    payloads: list[bytes | None] = [None] * len(prefix_bytes)
    by_len: dict[int, list[int]] = {}
    for i, win in enumerate(windows):
        by_len.setdefault(len(win), []).append(i)
    for length in sorted(by_len):
        idxs = by_len[length]
        group = np.stack([windows[i] for i in idxs])
        toks = _generate_group(params, config, sampler, group,
                               [rngs[i] for i in idxs], n_tokens)
        for row, i in enumerate(idxs):
            payloads[i] = tokens_to_bytes(toks[row])
    return payloads  # type: ignore[return-value]


def generate_payload(params, config: LMConfig, sampler: SamplerConfig, prefix) -> bytes:
    """Single-prefix convenience wrapper around the batch path."""
    return generate_payload_batch(params, config, sampler, [prefix])[0]
