"""Two-byte tokenization of binary content.

Consecutive byte pairs are read big-endian into one token, mirroring a hex
dump delimited every four hex characters: ``AA 04 FF 44`` becomes tokens
0xAA04, 0xFF44. Odd-length input is padded with a single 0x00 byte before
pairing; the original byte length is recorded so detokenization can drop
the pad again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import as_byte_array

#: Two bytes per token: 256**2 distinct values.
TOKEN_VOCAB_SIZE = 65536


@dataclass(frozen=True, eq=False)
class TokenSequence:
    tokens: np.ndarray  # 1-D int64, values in [0, 65535]
    origin_length_bytes: int

    def __len__(self) -> int:
        return int(self.tokens.shape[0])


def tokenize(data) -> TokenSequence:
    """Pair bytes big-endian into tokens; pads odd-length input with 0x00."""
    arr = as_byte_array(data, name="data")
    origin = arr.shape[0]
    if origin % 2:
        arr = np.concatenate([arr, np.zeros(1, dtype=np.uint8)])
    pairs = arr.reshape(-1, 2).astype(np.int64)
    tokens = pairs[:, 0] * 256 + pairs[:, 1]
    return TokenSequence(tokens=tokens, origin_length_bytes=origin)


def detokenize(seq: TokenSequence) -> bytes:
    """Inverse of :func:`tokenize` up to the declared original length."""
    tokens = np.asarray(seq.tokens, dtype=np.int64)
    out = np.empty((tokens.shape[0], 2), dtype=np.uint8)
    out[:, 0] = tokens >> 8
    out[:, 1] = tokens & 0xFF
    return out.reshape(-1)[: seq.origin_length_bytes].tobytes()


def tokens_to_bytes(tokens: np.ndarray) -> bytes:
    """Decode generated tokens (no pad bookkeeping: 2 bytes per token)."""
    seq = TokenSequence(tokens=np.asarray(tokens, dtype=np.int64),
                        origin_length_bytes=2 * len(tokens))
    return detokenize(seq)
