"""sklearn-style estimator wrapping the byte language model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..checkpoint import load_tensors, save_tensors
from ..errors import CheckpointFormatError, EmptyCorpusError
from ..optim import Adam
from ..validation import as_bytes, check_corpus
from .model import (LMConfig, init_lm_params, lm_loss, lm_loss_and_gradients,
                    lm_param_shapes)
from .sampling import SamplerConfig, generate_payload, generate_payload_batch
from .tokenizer import TOKEN_VOCAB_SIZE, tokenize

CHECKPOINT_KIND = "bytelm"

#: Config presets: desk-scale default, a deliberately weak single-block
#: generator standing in for recurrent baselines, and the 12-block
#: full-scale profile (not exercised by the test suite).
LM_PRESETS: dict[str, dict] = {
    "desk": dict(num_blocks=2, embed_dim=64, num_heads=4, context_len=256, ffn_dim=256),
    "compact": dict(num_blocks=1, embed_dim=32, num_heads=2, context_len=64, ffn_dim=64),
    "full": dict(num_blocks=12, embed_dim=768, num_heads=12, context_len=1024, ffn_dim=3072),
}


class ByteLanguageModel(BaseEstimator):
    """Decoder-only causal LM over two-byte tokens of raw binaries.

    ``fit`` trains from scratch on a corpus of byte strings: each of
    ``train_iterations`` optimizer steps draws one seeded context-length
    window from the tokenized corpus and applies Adam on the next-token
    cross-entropy. ``generate`` conditions on a file prefix and samples an
    append payload.
    """

    def __init__(self, num_blocks: int = 2, embed_dim: int = 64, num_heads: int = 4,
                 context_len: int = 256, vocab_size: int = TOKEN_VOCAB_SIZE,
                 ffn_dim: int = 256, learning_rate: float = 1e-3,
                 train_iterations: int = 1000, seed: int = 0):
        self.num_blocks = num_blocks
        self.embed_dim = embed_dim
        self.num_heads = num_heads
        self.context_len = context_len
        self.vocab_size = vocab_size
        self.ffn_dim = ffn_dim
        self.learning_rate = learning_rate
        self.train_iterations = train_iterations
        self.seed = seed

    @classmethod
    def from_preset(cls, preset: str, **overrides) -> "ByteLanguageModel":
        kwargs = dict(LM_PRESETS[preset])
        kwargs.update(overrides)
        return cls(**kwargs)

    def build_config(self) -> LMConfig:
        return LMConfig(
            num_blocks=self.num_blocks, embed_dim=self.embed_dim,
            num_heads=self.num_heads, context_len=self.context_len,
            vocab_size=self.vocab_size, ffn_dim=self.ffn_dim,
            learning_rate=self.learning_rate,
            train_iterations=self.train_iterations, seed=self.seed,
        )

    def fit(self, X, y=None) -> "ByteLanguageModel":
        corpus = check_corpus(X)
        config = self.build_config()
        if config.vocab_size != TOKEN_VOCAB_SIZE:
            raise ValueError("byte training requires the full two-byte vocabulary")

        token_arrays = [tokenize(data).tokens for data in corpus]
        token_arrays = [t for t in token_arrays if t.shape[0] >= 2]
        if not token_arrays:
            raise EmptyCorpusError("corpus holds no file with >= 2 tokens (4 bytes)")

        init_ss, window_ss = np.random.SeedSequence(config.seed).spawn(2)
        params = init_lm_params(config, rng=np.random.default_rng(init_ss))
        window_rng = np.random.default_rng(window_ss)
        optimizer = Adam(params, config.learning_rate)

        lengths = np.array([t.shape[0] for t in token_arrays], dtype=np.float64)
        weights = lengths / lengths.sum()
        trace = np.empty(config.train_iterations, dtype=np.float64)
        for step in range(config.train_iterations):
            toks = token_arrays[window_rng.choice(len(token_arrays), p=weights)]
            span = min(config.context_len, toks.shape[0] - 1) + 1
            start = int(window_rng.integers(0, toks.shape[0] - span + 1))
            loss, grads = lm_loss_and_gradients(params, config, toks[start:start + span])
            optimizer.step(params, grads)
            trace[step] = loss

        self.config_ = config
        self.params_ = params
        self.loss_trace_ = trace
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError("ByteLanguageModel is not fitted; call fit or load")

    def generate(self, prefix, sampler: SamplerConfig) -> bytes:
        self._check_fitted()
        return generate_payload(self.params_, self.config_, sampler, prefix)

    def generate_batch(self, prefixes, sampler: SamplerConfig) -> list[bytes]:
        self._check_fitted()
        return generate_payload_batch(self.params_, self.config_, sampler, prefixes)

    def sequence_loss(self, data) -> float:
        """Next-token loss over the first context window of ``data``."""
        self._check_fitted()
        toks = tokenize(as_bytes(data)).tokens
        return lm_loss(self.params_, self.config_, toks[: self.config_.context_len + 1])

    def save(self, path) -> None:
        self._check_fitted()
        save_tensors(path, CHECKPOINT_KIND, self.config_.to_header(), self.params_)

    @classmethod
    def load(cls, path) -> "ByteLanguageModel":
        kind, header, tensors = load_tensors(path)
        if kind != CHECKPOINT_KIND:
            raise CheckpointFormatError(f"expected kind={CHECKPOINT_KIND}, got {kind}")
        config = LMConfig.from_header(header)
        expected = lm_param_shapes(config)
        if list(tensors) != list(expected):
            raise CheckpointFormatError("tensor names do not match the declared layout")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise CheckpointFormatError(f"tensor {name} has shape "
                                            f"{tensors[name].shape}, expected {shape}")
        model = cls(**{k: getattr(config, k) for k in (
            "num_blocks", "embed_dim", "num_heads", "context_len", "vocab_size",
            "ffn_dim", "learning_rate", "train_iterations", "seed")})
        model.config_ = config
        model.params_ = tensors
        return model


def write_loss_trace_csv(path, trace) -> None:
    """Loss trace as ``iteration,loss`` rows (1-based iterations)."""
    lines = ["iteration,loss"]
    lines += [f"{i + 1},{float(v)!r}" for i, v in enumerate(trace)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
