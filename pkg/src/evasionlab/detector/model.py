"""Gated convolutional byte classifier, hand-rolled in numpy.

Architecture: byte embedding (index 256 = padding) over the first
``max_input_bytes`` bytes, two parallel strided convolutions combined by
multiplicative sigmoid gating, temporal global max pooling, one hidden
fully connected layer, sigmoid output. Bytes past the input window are
invisible to the model, which is exactly the truncation behaviour append
attacks probe.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from ..errors import EmptyInputError
from ..validation import as_byte_array

PAD_INDEX = 256


@dataclass(frozen=True)
class DetectorConfig:
    max_input_bytes: int = 65536
    embed_dim: int = 8
    conv_filters: int = 16
    conv_width: int = 512
    conv_stride: int = 512
    hidden_dim: int = 16
    learning_rate: float = 1e-3
    train_epochs: int = 3
    seed: int = 0
    threshold: float = 0.5
    batch_size: int = 16
    val_fraction: float = 0.25
    calibrate_fpr: float | None = None

    def __post_init__(self) -> None:
        if self.conv_stride < 1:
            raise ValueError("conv_stride must be >= 1")
        if self.conv_width < 1 or self.conv_width > self.max_input_bytes:
            raise ValueError("conv_width must be in [1, max_input_bytes]")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if self.train_epochs < 1:
            raise ValueError("train_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.calibrate_fpr is not None and not 0.0 < self.calibrate_fpr < 1.0:
            raise ValueError("calibrate_fpr must be in (0, 1)")

    @property
    def num_windows(self) -> int:
        return (self.max_input_bytes - self.conv_width) // self.conv_stride + 1

    def to_header(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = "none" if value is None else value
        return out

    @classmethod
    def from_header(cls, header: dict[str, str]) -> "DetectorConfig":
        kwargs = {}
        for f in fields(cls):
            raw = header[f.name]
            if f.name == "calibrate_fpr":
                kwargs[f.name] = None if raw == "none" else float(raw)
            elif f.name in ("learning_rate", "threshold", "val_fraction"):
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = int(raw)
        return cls(**kwargs)


def detector_param_shapes(config: DetectorConfig) -> dict[str, tuple[int, ...]]:
    we = config.conv_width * config.embed_dim
    return {
        "emb": (257, config.embed_dim),
        "conv_feat.w": (we, config.conv_filters),
        "conv_feat.b": (config.conv_filters,),
        "conv_gate.w": (we, config.conv_filters),
        "conv_gate.b": (config.conv_filters,),
        "fc.w": (config.conv_filters, config.hidden_dim),
        "fc.b": (config.hidden_dim,),
        "out.w": (config.hidden_dim, 1),
        "out.b": (1,),
    }


def init_detector_params(config: DetectorConfig, rng: np.random.Generator | None = None,
                         dtype=np.float32) -> dict[str, np.ndarray]:
    """Unit-variance embedding, 1/sqrt(fan_in) weights, zero biases."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in detector_param_shapes(config).items():
        if name.endswith(".b"):
            arr = np.zeros(shape)
        elif name == "emb":
            arr = rng.normal(0.0, 1.0, shape)
        else:
            arr = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), shape)
        params[name] = arr.astype(dtype)
    return params


def bytes_to_ids(data, config: DetectorConfig) -> np.ndarray:
    """First ``max_input_bytes`` bytes as embedding ids, padded with 256."""
    arr = as_byte_array(data, name="data")
    ids = np.full(config.max_input_bytes, PAD_INDEX, dtype=np.int64)
    n = min(arr.shape[0], config.max_input_bytes)
    ids[:n] = arr[:n]
    return ids


def _window_ids(ids: np.ndarray, config: DetectorConfig) -> np.ndarray:
    # (B, M) -> (B, T, W) strided windows
    W, S, M = config.conv_width, config.conv_stride, config.max_input_bytes
    if S == W and M % W == 0:
        return ids.reshape(ids.shape[0], -1, W)
    view = np.lib.stride_tricks.sliding_window_view(ids, W, axis=1)
    return np.ascontiguousarray(view[:, ::S])


def detector_forward(params, config: DetectorConfig, ids: np.ndarray,
                     want_cache: bool = False):
    """Scores in [0, 1] for a (B, max_input_bytes) id batch."""
    B = ids.shape[0]
    wids = _window_ids(ids, config)
    T = wids.shape[1]
    x = params["emb"][wids].reshape(B, T, -1)
    feat = x @ params["conv_feat.w"] + params["conv_feat.b"]
    gate = expit(x @ params["conv_gate.w"] + params["conv_gate.b"])
    h = feat * gate
    pooled = h.max(axis=1)
    amax = h.argmax(axis=1)
    hpre = pooled @ params["fc.w"] + params["fc.b"]
    hid = np.maximum(hpre, 0.0)
    logit = (hid @ params["out.w"] + params["out.b"])[:, 0]
    score = expit(logit)
    if not want_cache:
        return score
    cache = {"wids": wids, "x": x, "feat": feat, "gate": gate, "h_shape": h.shape,
             "amax": amax, "pooled": pooled, "hpre": hpre, "hid": hid, "logit": logit}
    return score, cache


def detector_backward(params, config: DetectorConfig, cache, dlogit: np.ndarray):
    """Gradients of a scalar loss given d(loss)/d(logit)."""
    grads: dict[str, np.ndarray] = {}
    hid, pooled = cache["hid"], cache["pooled"]
    grads["out.w"] = hid.T @ dlogit[:, None]
    grads["out.b"] = np.array([dlogit.sum()], dtype=hid.dtype)
    dhid = dlogit[:, None] @ params["out.w"].T
    dhpre = dhid * (cache["hpre"] > 0)
    grads["fc.w"] = pooled.T @ dhpre
    grads["fc.b"] = dhpre.sum(axis=0)
    dpooled = dhpre @ params["fc.w"].T

    dh = np.zeros(cache["h_shape"], dtype=pooled.dtype)
    np.put_along_axis(dh, cache["amax"][:, None, :], dpooled[:, None, :], axis=1)
    feat, gate, x = cache["feat"], cache["gate"], cache["x"]
    dfeat = dh * gate
    dgpre = dh * feat * gate * (1.0 - gate)

    B, T, WE = x.shape
    x2 = x.reshape(B * T, WE)
    grads["conv_feat.w"] = x2.T @ dfeat.reshape(B * T, -1)
    grads["conv_feat.b"] = dfeat.sum(axis=(0, 1))
    grads["conv_gate.w"] = x2.T @ dgpre.reshape(B * T, -1)
    grads["conv_gate.b"] = dgpre.sum(axis=(0, 1))

    dx = dfeat @ params["conv_feat.w"].T + dgpre @ params["conv_gate.w"].T
    dx = dx.reshape(B, T, config.conv_width, config.embed_dim)
    demb = np.zeros_like(params["emb"])
    np.add.at(demb, cache["wids"], dx)
    grads["emb"] = demb
    return grads


def bce_loss_and_dlogit(logit: np.ndarray, y: np.ndarray):
    """Stable binary cross-entropy on raw logits; mean over the batch."""
    loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
    dlogit = (expit(logit) - y) / logit.shape[0]
    return loss, dlogit.astype(logit.dtype, copy=False)


def detector_score(params, config: DetectorConfig, data) -> float:
    """Score one byte sequence; pure function of (params, first M bytes)."""
    arr = as_byte_array(data, name="data")
    if arr.shape[0] == 0:
        raise EmptyInputError("cannot score empty input")
    ids = bytes_to_ids(arr, config)
    return float(detector_forward(params, config, ids[None, :])[0])


def detector_score_batch(params, config: DetectorConfig, items, chunk: int = 32) -> np.ndarray:
    """Vectorised scoring with bounded memory."""
    scores = np.empty(len(items), dtype=np.float64)
    for start in range(0, len(items), chunk):
        part = items[start:start + chunk]
        ids = np.stack([bytes_to_ids(p, config) for p in part])
        scores[start:start + len(part)] = detector_forward(params, config, ids)
    return scores
