"""sklearn-style estimator around the gated convolutional byte classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.metrics import roc_auc_score

from ..checkpoint import load_tensors, save_tensors
from ..errors import CheckpointFormatError, EmptyCorpusError
from ..optim import Adam
from ..validation import as_bytes
from .model import (DetectorConfig, bce_loss_and_dlogit, bytes_to_ids,
                    detector_backward, detector_forward, detector_param_shapes,
                    detector_score, detector_score_batch, init_detector_params)

CHECKPOINT_KIND = "detector"


class GatedConvDetector(BaseEstimator, ClassifierMixin):
    """Byte-level malware classifier trained with binary cross-entropy.

    ``fit`` takes raw byte strings plus 0/1 labels (1 = malicious), holds
    out a seeded stratified validation split, and records accuracy and AUC
    on it. With ``calibrate_fpr`` set, the decision threshold is moved to
    the validation-benign score quantile matching that false-positive
    rate; otherwise the configured threshold applies.
    """

    def __init__(self, max_input_bytes: int = 65536, embed_dim: int = 8,
                 conv_filters: int = 16, conv_width: int = 512, conv_stride: int = 512,
                 hidden_dim: int = 16, learning_rate: float = 1e-3,
                 train_epochs: int = 3, seed: int = 0, threshold: float = 0.5,
                 batch_size: int = 16, val_fraction: float = 0.25,
                 calibrate_fpr: float | None = None):
        self.max_input_bytes = max_input_bytes
        self.embed_dim = embed_dim
        self.conv_filters = conv_filters
        self.conv_width = conv_width
        self.conv_stride = conv_stride
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.train_epochs = train_epochs
        self.seed = seed
        self.threshold = threshold
        self.batch_size = batch_size
        self.val_fraction = val_fraction
        self.calibrate_fpr = calibrate_fpr

    def build_config(self) -> DetectorConfig:
        return DetectorConfig(
            max_input_bytes=self.max_input_bytes, embed_dim=self.embed_dim,
            conv_filters=self.conv_filters, conv_width=self.conv_width,
            conv_stride=self.conv_stride, hidden_dim=self.hidden_dim,
            learning_rate=self.learning_rate, train_epochs=self.train_epochs,
            seed=self.seed, threshold=self.threshold, batch_size=self.batch_size,
            val_fraction=self.val_fraction, calibrate_fpr=self.calibrate_fpr,
        )

    def fit(self, X, y) -> "GatedConvDetector":
        data = [as_bytes(item, name=f"X[{i}]") for i, item in enumerate(X)]
        labels = np.asarray(y, dtype=np.float64)
        if labels.shape[0] != len(data):
            raise ValueError("X and y must have the same length")
        if not np.all(np.isin(labels, (0.0, 1.0))):
            raise ValueError("labels must be 0 (benign) or 1 (malicious)")
        if not (labels == 0).any() or not (labels == 1).any():
            raise EmptyCorpusError("need at least one benign and one malicious sample")

        config = self.build_config()
        split_ss, init_ss, shuffle_ss = np.random.SeedSequence(config.seed).spawn(3)
        train_idx, val_idx = _stratified_split(labels, config.val_fraction,
                                               np.random.default_rng(split_ss))
        params = init_detector_params(config, rng=np.random.default_rng(init_ss))
        optimizer = Adam(params, config.learning_rate)
        shuffle_rng = np.random.default_rng(shuffle_ss)

        epoch_losses = []
        for _ in range(config.train_epochs):
            order = shuffle_rng.permutation(train_idx)
            batch_losses = []
            for start in range(0, order.shape[0], config.batch_size):
                batch = order[start:start + config.batch_size]
                ids = np.stack([bytes_to_ids(data[i], config) for i in batch])
                yb = labels[batch]
                _, cache = detector_forward(params, config, ids, want_cache=True)
                loss, dlogit = bce_loss_and_dlogit(cache["logit"], yb)
                grads = detector_backward(params, config, cache, dlogit)
                optimizer.step(params, grads)
                batch_losses.append(loss)
            epoch_losses.append(float(np.mean(batch_losses)))

        self.config_ = config
        self.params_ = params
        self.classes_ = np.array([0, 1])
        self.threshold_ = float(config.threshold)
        self.history_ = {"train_loss": epoch_losses,
                         "n_train": int(train_idx.shape[0]),
                         "n_val": int(val_idx.shape[0])}
        self._record_validation(data, labels, val_idx)
        return self

    def _record_validation(self, data, labels, val_idx) -> None:
        config = self.config_
        if val_idx.shape[0] == 0:
            self.val_auc_ = float("nan")
            self.val_accuracy_ = float("nan")
            return
        scores = detector_score_batch(self.params_, config, [data[i] for i in val_idx])
        yv = labels[val_idx]
        if config.calibrate_fpr is not None and (yv == 0).any():
            benign_scores = scores[yv == 0]
            self.threshold_ = float(np.quantile(benign_scores, 1.0 - config.calibrate_fpr,
                                                method="higher"))
        self.val_auc_ = (float(roc_auc_score(yv, scores))
                         if (yv == 0).any() and (yv == 1).any() else float("nan"))
        self.val_accuracy_ = float(np.mean((scores >= self.threshold_) == (yv == 1.0)))
        self.history_["val_auc"] = self.val_auc_
        self.history_["val_accuracy"] = self.val_accuracy_

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError("GatedConvDetector is not fitted; call fit or load")

    def score_bytes(self, data) -> float:
        self._check_fitted()
        return detector_score(self.params_, self.config_, data)

    def decision_scores(self, X) -> np.ndarray:
        self._check_fitted()
        return detector_score_batch(self.params_, self.config_,
                                    [as_bytes(item) for item in X])

    def predict_proba(self, X) -> np.ndarray:
        scores = self.decision_scores(X)
        return np.column_stack([1.0 - scores, scores])

    def predict(self, X) -> np.ndarray:
        return (self.decision_scores(X) >= self.threshold_).astype(int)

    def save(self, path) -> None:
        self._check_fitted()
        header = self.config_.to_header()
        header["resolved_threshold"] = self.threshold_
        save_tensors(path, CHECKPOINT_KIND, header, self.params_)

    @classmethod
    def load(cls, path) -> "GatedConvDetector":
        kind, header, tensors = load_tensors(path)
        if kind != CHECKPOINT_KIND:
            raise CheckpointFormatError(f"expected kind={CHECKPOINT_KIND}, got {kind}")
        resolved = float(header.pop("resolved_threshold"))
        config = DetectorConfig.from_header(header)
        expected = detector_param_shapes(config)
        if list(tensors) != list(expected):
            raise CheckpointFormatError("tensor names do not match the declared layout")
        model = cls(**{name: getattr(config, name) for name in (
            "max_input_bytes", "embed_dim", "conv_filters", "conv_width", "conv_stride",
            "hidden_dim", "learning_rate", "train_epochs", "seed", "threshold",
            "batch_size", "val_fraction", "calibrate_fpr")})
        model.config_ = config
        model.params_ = tensors
        model.classes_ = np.array([0, 1])
        model.threshold_ = resolved
        model.history_ = {}
        return model


def _stratified_split(labels: np.ndarray, val_fraction: float,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    train_parts, val_parts = [], []
    for cls in (0.0, 1.0):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        n_val = int(round(val_fraction * idx.shape[0]))
        if val_fraction > 0 and idx.shape[0] >= 2:
            n_val = max(n_val, 1)
        n_val = min(n_val, idx.shape[0] - 1)  # keep at least one training sample
        val_parts.append(idx[:n_val])
        train_parts.append(idx[n_val:])
    train = np.sort(np.concatenate(train_parts))
    val = np.sort(np.concatenate(val_parts))
    return train, val
