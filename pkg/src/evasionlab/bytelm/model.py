"""Decoder-only causal transformer over two-byte tokens, in plain numpy.

Pre-layer-norm blocks (self-attention then GELU feed-forward, residual
connections), learned positional embeddings, untied output projection.
Forward, loss, and gradients are hand-written so training has no framework
dependency and gradients can be audited against finite differences.

Functions operate on a flat ``dict[str, np.ndarray]`` of parameters whose
key order is the declared checkpoint tensor order. All computations follow
the parameter dtype: float32 for training speed, float64 for gradient
audits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from ..errors import ContextOverflowError, EmptyInputError, SequenceTooShortError
from .tokenizer import TOKEN_VOCAB_SIZE, TokenSequence

_INIT_STD = 0.02
_LN_EPS = 1e-5
_GELU_C = 0.7978845608028654  # sqrt(2/pi)


@dataclass(frozen=True)
class LMConfig:
    """Generator hyperparameters.

    ``vocab_size`` is 65,536 whenever the model speaks bytes through the
    two-byte tokenizer (fit/generate enforce this); it stays configurable
    so sub-10k-parameter models can be built for gradient audits.
    """

    num_blocks: int = 2
    embed_dim: int = 64
    num_heads: int = 4
    context_len: int = 256
    vocab_size: int = TOKEN_VOCAB_SIZE
    ffn_dim: int = 256
    learning_rate: float = 1e-3
    train_iterations: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        if self.embed_dim < 1 or self.num_heads < 1:
            raise ValueError("embed_dim and num_heads must be >= 1")
        if self.embed_dim % self.num_heads:
            raise ValueError("embed_dim must be divisible by num_heads")
        if self.context_len < 2:
            raise ValueError("context_len must be >= 2")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.ffn_dim < 1:
            raise ValueError("ffn_dim must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.train_iterations < 1:
            raise ValueError("train_iterations must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads

    def to_header(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_header(cls, header: dict[str, str]) -> "LMConfig":
        kwargs = {}
        for f in fields(cls):
            raw = header[f.name]
            kwargs[f.name] = float(raw) if f.type == "float" else int(raw)
        return cls(**kwargs)


def lm_param_shapes(config: LMConfig) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes in declared (checkpoint) order."""
    d, f, v, c = config.embed_dim, config.ffn_dim, config.vocab_size, config.context_len
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (v, d),
        "pos_emb": (c, d),
    }
    for i in range(config.num_blocks):
        p = f"block{i}."
        shapes[p + "ln1.scale"] = (d,)
        shapes[p + "ln1.shift"] = (d,)
        shapes[p + "attn.wq"] = (d, d)
        shapes[p + "attn.bq"] = (d,)
        shapes[p + "attn.wk"] = (d, d)
        shapes[p + "attn.bk"] = (d,)
        shapes[p + "attn.wv"] = (d, d)
        shapes[p + "attn.bv"] = (d,)
        shapes[p + "attn.wo"] = (d, d)
        shapes[p + "attn.bo"] = (d,)
        shapes[p + "ln2.scale"] = (d,)
        shapes[p + "ln2.shift"] = (d,)
        shapes[p + "ffn.w1"] = (d, f)
        shapes[p + "ffn.b1"] = (f,)
        shapes[p + "ffn.w2"] = (f, d)
        shapes[p + "ffn.b2"] = (d,)
    shapes["ln_out.scale"] = (d,)
    shapes["ln_out.shift"] = (d,)
    shapes["w_out"] = (d, v)
    return shapes


def init_lm_params(config: LMConfig, rng: np.random.Generator | None = None,
                   dtype=np.float32) -> dict[str, np.ndarray]:
    """Seeded init: Gaussian(0, 0.02) weights, zero biases, identity norms."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in lm_param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("scale",):
            arr = np.ones(shape)
        elif leaf in ("shift",) or leaf.startswith("b"):
            arr = np.zeros(shape)
        else:
            arr = rng.normal(0.0, _INIT_STD, shape)
        params[name] = arr.astype(dtype)
    return params


def lm_num_params(config: LMConfig) -> int:
    return sum(int(np.prod(s)) for s in lm_param_shapes(config).values())


def _token_array(tokens) -> np.ndarray:
    if isinstance(tokens, TokenSequence):
        arr = tokens.tokens
    else:
        arr = np.asarray(tokens, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("token input must be 1-D")
    return arr.astype(np.int64, copy=False)


def _check_tokens(arr: np.ndarray, config: LMConfig) -> None:
    if arr.shape[0] == 0:
        raise EmptyInputError("token sequence must be non-empty")
    if arr.shape[0] > config.context_len:
        raise ContextOverflowError(
            f"sequence of {arr.shape[0]} tokens exceeds context_len={config.context_len}"
        )
    if arr.min() < 0 or arr.max() >= config.vocab_size:
        raise ValueError("token ids out of range for vocab_size")


# ---------------------------------------------------------------------------
# primitive layers (shared by single-sequence and batched paths; all act on
# the last axis and broadcast over leading axes)

def _layer_norm(x, scale, shift):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return xhat * scale + shift, (xhat, inv)


def _layer_norm_backward(dy, cache, scale):
    xhat, inv = cache
    dg = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)))
    db = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * scale
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _gelu(x):
    u = _GELU_C * (x + 0.044715 * x * x * x)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), t


def _gelu_backward(dy, x, t):
    du = _GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
    dgelu = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
    return dy * dgelu


def _softmax_last(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x, num_heads):
    # (..., L, D) -> (..., H, L, dh)
    *lead, L, D = x.shape
    x = x.reshape(*lead, L, num_heads, D // num_heads)
    return np.moveaxis(x, -2, -3)


def _merge_heads(x):
    # (..., H, L, dh) -> (..., L, D)
    x = np.moveaxis(x, -3, -2)
    *lead, L, H, dh = x.shape
    return x.reshape(*lead, L, H * dh)


# ---------------------------------------------------------------------------
# full forward (single sequence) with caches for backprop

def _forward_cached(params, config: LMConfig, tokens: np.ndarray):
    L = tokens.shape[0]
    H = config.num_heads
    scale = 1.0 / math.sqrt(config.head_dim)
    x = params["tok_emb"][tokens] + params["pos_emb"][:L]
    mask = np.triu(np.ones((L, L), dtype=bool), k=1)

    block_caches = []
    for i in range(config.num_blocks):
        p = f"block{i}."
        x_in = x
        y, ln1_cache = _layer_norm(x, params[p + "ln1.scale"], params[p + "ln1.shift"])
        q = _split_heads(y @ params[p + "attn.wq"] + params[p + "attn.bq"], H)
        k = _split_heads(y @ params[p + "attn.wk"] + params[p + "attn.bk"], H)
        v = _split_heads(y @ params[p + "attn.wv"] + params[p + "attn.bv"], H)
        scores = (q @ np.swapaxes(k, -1, -2)) * scale
        scores[..., mask] = -np.inf
        probs = _softmax_last(scores)
        ctx = _merge_heads(probs @ v)
        attn_out = ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        x_mid = x_in + attn_out

        y2, ln2_cache = _layer_norm(x_mid, params[p + "ln2.scale"], params[p + "ln2.shift"])
        a = y2 @ params[p + "ffn.w1"] + params[p + "ffn.b1"]
        g, tanh_cache = _gelu(a)
        ffn_out = g @ params[p + "ffn.w2"] + params[p + "ffn.b2"]
        x = x_mid + ffn_out

        block_caches.append({
            "y": y, "ln1": ln1_cache, "q": q, "k": k, "v": v, "probs": probs,
            "ctx": ctx, "x_mid": x_mid, "y2": y2, "ln2": ln2_cache,
            "a": a, "g": g, "tanh": tanh_cache,
        })

    h, ln_out_cache = _layer_norm(x, params["ln_out.scale"], params["ln_out.shift"])
    logits = h @ params["w_out"]
    cache = {"tokens": tokens, "blocks": block_caches, "h": h,
             "ln_out": ln_out_cache, "scale": scale}
    return logits, cache


def lm_forward(params, config: LMConfig, tokens, return_attention: bool = False):
    """Next-token logits for every position; rows depend only on the
    causal prefix. Optionally also returns per-block attention weights."""
    arr = _token_array(tokens)
    _check_tokens(arr, config)
    logits, cache = _forward_cached(params, config, arr)
    if return_attention:
        return logits, [bc["probs"] for bc in cache["blocks"]]
    return logits


def _cross_entropy(logits, targets):
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    lse = np.log(np.exp(z).sum(axis=-1))
    logp_target = z[np.arange(targets.shape[0]), targets] - lse
    return -logp_target.mean()


def lm_loss(params, config: LMConfig, tokens) -> float:
    """Mean next-token cross-entropy over positions 0..n-2."""
    arr = _token_array(tokens)
    if arr.shape[0] < 2:
        raise SequenceTooShortError("need at least 2 tokens for next-token loss")
    inputs, targets = arr[:-1], arr[1:]
    _check_tokens(inputs, config)
    if targets.max() >= config.vocab_size:
        raise ValueError("target token id out of range")
    logits, _ = _forward_cached(params, config, inputs)
    return float(_cross_entropy(logits, targets))


def lm_loss_and_gradients(params, config: LMConfig, tokens):
    """Loss plus exact gradients for every parameter tensor."""
    arr = _token_array(tokens)
    if arr.shape[0] < 2:
        raise SequenceTooShortError("need at least 2 tokens for next-token loss")
    inputs, targets = arr[:-1], arr[1:]
    _check_tokens(inputs, config)
    if targets.max() >= config.vocab_size:
        raise ValueError("target token id out of range")

    logits, cache = _forward_cached(params, config, inputs)
    L = inputs.shape[0]
    H = config.num_heads
    scale = cache["scale"]

    # fused softmax + cross-entropy (one pass over the vocab axis)
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    e = np.exp(z)
    se = e.sum(axis=-1, keepdims=True)
    rows = np.arange(L)
    loss = float(-(z[rows, targets] - np.log(se[:, 0])).mean())
    dlogits = e / se
    dlogits[rows, targets] -= 1.0
    dlogits /= L

    grads = {name: None for name in params}
    grads["w_out"] = cache["h"].T @ dlogits
    dh = dlogits @ params["w_out"].T
    dx, dg, db = _layer_norm_backward(dh, cache["ln_out"], params["ln_out.scale"])
    grads["ln_out.scale"] = dg
    grads["ln_out.shift"] = db

    for i in reversed(range(config.num_blocks)):
        p = f"block{i}."
        bc = cache["blocks"][i]

        # feed-forward sub-layer
        dffn_out = dx
        grads[p + "ffn.w2"] = bc["g"].T @ dffn_out
        grads[p + "ffn.b2"] = dffn_out.sum(axis=0)
        dgelu_out = dffn_out @ params[p + "ffn.w2"].T
        da = _gelu_backward(dgelu_out, bc["a"], bc["tanh"])
        grads[p + "ffn.w1"] = bc["y2"].T @ da
        grads[p + "ffn.b1"] = da.sum(axis=0)
        dy2 = da @ params[p + "ffn.w1"].T
        dx_mid, dg2, db2 = _layer_norm_backward(dy2, bc["ln2"], params[p + "ln2.scale"])
        grads[p + "ln2.scale"] = dg2
        grads[p + "ln2.shift"] = db2
        dx_mid = dx_mid + dx  # residual

        # attention sub-layer
        dattn_out = dx_mid
        grads[p + "attn.wo"] = bc["ctx"].T @ dattn_out
        grads[p + "attn.bo"] = dattn_out.sum(axis=0)
        dctx = _split_heads(dattn_out @ params[p + "attn.wo"].T, H)
        dprobs = dctx @ np.swapaxes(bc["v"], -1, -2)
        dv = np.swapaxes(bc["probs"], -1, -2) @ dctx
        sum_term = (dprobs * bc["probs"]).sum(axis=-1, keepdims=True)
        dscores = bc["probs"] * (dprobs - sum_term)
        dscores *= scale
        dq = dscores @ bc["k"]
        dk = np.swapaxes(dscores, -1, -2) @ bc["q"]

        dq = _merge_heads(dq)
        dk = _merge_heads(dk)
        dv = _merge_heads(dv)
        y = bc["y"]
        grads[p + "attn.wq"] = y.T @ dq
        grads[p + "attn.bq"] = dq.sum(axis=0)
        grads[p + "attn.wk"] = y.T @ dk
        grads[p + "attn.bk"] = dk.sum(axis=0)
        grads[p + "attn.wv"] = y.T @ dv
        grads[p + "attn.bv"] = dv.sum(axis=0)
        dy = (dq @ params[p + "attn.wq"].T
              + dk @ params[p + "attn.wk"].T
              + dv @ params[p + "attn.wv"].T)
        dx_ln, dg1, db1 = _layer_norm_backward(dy, bc["ln1"], params[p + "ln1.scale"])
        grads[p + "ln1.scale"] = dg1
        grads[p + "ln1.shift"] = db1
        dx = dx_ln + dattn_out  # residual

    dtok = np.zeros_like(params["tok_emb"])
    np.add.at(dtok, inputs, dx)
    grads["tok_emb"] = dtok
    dpos = np.zeros_like(params["pos_emb"])
    dpos[:L] = dx
    grads["pos_emb"] = dpos
    return loss, grads


def lm_gradients(params, config: LMConfig, tokens) -> dict[str, np.ndarray]:
    """Exact gradients of :func:`lm_loss` w.r.t. every parameter."""
    _, grads = lm_loss_and_gradients(params, config, tokens)
    return grads


# ---------------------------------------------------------------------------
# batched incremental decoding (generation only; no gradient caches)

class DecodeState:
    """Per-block key/value cache for a batch of sequences."""

    __slots__ = ("keys", "values", "length")

    def __init__(self, config: LMConfig, batch: int, dtype):
        shape = (batch, config.num_heads, config.context_len, config.head_dim)
        self.keys = [np.zeros(shape, dtype=dtype) for _ in range(config.num_blocks)]
        self.values = [np.zeros(shape, dtype=dtype) for _ in range(config.num_blocks)]
        self.length = 0


def lm_prefill(params, config: LMConfig, tokens: np.ndarray):
    """Run the block stack over a (batch, L) window, filling the KV cache.

    Returns the decode state and next-token logits at the final position.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    B, L = tokens.shape
    if L < 1:
        raise EmptyInputError("prefill window must be non-empty")
    if L > config.context_len:
        raise ContextOverflowError(f"prefill window {L} exceeds context_len")
    H = config.num_heads
    scale = 1.0 / math.sqrt(config.head_dim)
    dtype = params["tok_emb"].dtype
    state = DecodeState(config, B, dtype)

    x = params["tok_emb"][tokens] + params["pos_emb"][:L]
    mask = np.triu(np.ones((L, L), dtype=bool), k=1)
    for i in range(config.num_blocks):
        p = f"block{i}."
        y, _ = _layer_norm(x, params[p + "ln1.scale"], params[p + "ln1.shift"])
        q = _split_heads(y @ params[p + "attn.wq"] + params[p + "attn.bq"], H)
        k = _split_heads(y @ params[p + "attn.wk"] + params[p + "attn.bk"], H)
        v = _split_heads(y @ params[p + "attn.wv"] + params[p + "attn.bv"], H)
        state.keys[i][:, :, :L] = k
        state.values[i][:, :, :L] = v
        scores = (q @ np.swapaxes(k, -1, -2)) * scale
        scores[..., mask] = -np.inf
        ctx = _merge_heads(_softmax_last(scores) @ v)
        x = x + ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        y2, _ = _layer_norm(x, params[p + "ln2.scale"], params[p + "ln2.shift"])
        g, _ = _gelu(y2 @ params[p + "ffn.w1"] + params[p + "ffn.b1"])
        x = x + g @ params[p + "ffn.w2"] + params[p + "ffn.b2"]

    state.length = L
    h_last, _ = _layer_norm(x[:, -1], params["ln_out.scale"], params["ln_out.shift"])
    return state, h_last @ params["w_out"]


def lm_decode_step(params, config: LMConfig, state: DecodeState, new_tokens: np.ndarray):
    """Append one token per batch row and return next-token logits."""
    pos = state.length
    if pos >= config.context_len:
        raise ContextOverflowError("decode cache full; re-prefill a shorter window")
    H = config.num_heads
    dh = config.head_dim
    scale = 1.0 / math.sqrt(dh)
    B = new_tokens.shape[0]

    x = params["tok_emb"][new_tokens] + params["pos_emb"][pos]
    for i in range(config.num_blocks):
        p = f"block{i}."
        y, _ = _layer_norm(x, params[p + "ln1.scale"], params[p + "ln1.shift"])
        q = (y @ params[p + "attn.wq"] + params[p + "attn.bq"]).reshape(B, H, 1, dh)
        k = (y @ params[p + "attn.wk"] + params[p + "attn.bk"]).reshape(B, H, dh)
        v = (y @ params[p + "attn.wv"] + params[p + "attn.bv"]).reshape(B, H, dh)
        state.keys[i][:, :, pos] = k
        state.values[i][:, :, pos] = v
        keys = state.keys[i][:, :, : pos + 1]
        values = state.values[i][:, :, : pos + 1]
        scores = (q @ np.swapaxes(keys, -1, -2)) * scale  # (B, H, 1, pos+1)
        ctx = (_softmax_last(scores) @ values).reshape(B, H * dh)
        x = x + ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        y2, _ = _layer_norm(x, params[p + "ln2.scale"], params[p + "ln2.shift"])
        g, _ = _gelu(y2 @ params[p + "ffn.w1"] + params[p + "ffn.b1"])
        x = x + g @ params[p + "ffn.w2"] + params[p + "ffn.b2"]

    state.length = pos + 1
    h, _ = _layer_norm(x, params["ln_out.scale"], params["ln_out.shift"])
    return h @ params["w_out"]
