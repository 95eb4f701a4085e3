"""Lightweight residual MLP sign classifier trained on pre-extracted features.

Layers: ``h1 = lrelu(A1 x + b1) + x``, ``h2 = lrelu(A2 h1 + b2)``,
``h3 = lrelu(A3 h2 + b3)``, ``softmax(A4 h3 + b4)``. Training runs in
float64 with BLAS; inference goes through ``einsum`` so that a row's output
does not depend on which other rows share the batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import FeatureSequence, Spotting, _readonly, frame_to_feature_index
from .errors import ContractError, ShapeError
from .pseudo import PredictionSequence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpModel:
    weights: tuple
    biases: tuple
    vocab: tuple
    leaky_slope: float = 0.01

    def __post_init__(self):
        ws = tuple(_readonly(np.array(w, copy=True)) for w in self.weights)
        bs = tuple(_readonly(np.array(b, copy=True)) for b in self.biases)
        if len(ws) != 4 or len(bs) != 4:
            raise ShapeError("an MLP model has exactly four affine layers")
        F = ws[0].shape[1]
        if ws[0].shape != (F, F):
            raise ShapeError(f"first layer must map F->F for the residual, got {ws[0].shape}")
        for prev, w, b in zip(ws, ws[1:], bs[1:]):
            if w.shape[1] != prev.shape[0]:
                raise ShapeError("consecutive layer shapes do not chain")
        for w, b in zip(ws, bs):
            if b.shape != (w.shape[0],):
                raise ShapeError("bias length must equal layer output size")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ContractError("model parameters must be finite")
        if ws[3].shape[0] != len(self.vocab):
            raise ShapeError(f"final layer has {ws[3].shape[0]} outputs for {len(self.vocab)} classes")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "vocab", tuple(self.vocab))

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.vocab)

    @property
    def layer_dims(self) -> tuple:
        return tuple(w.shape[0] for w in self.weights)

    @classmethod
    def init(cls, in_dim: int, vocab: Sequence[str], hidden=(512, 256), leaky_slope=0.01, rng=None):
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(rng)
        dims = [in_dim, in_dim, *hidden, len(vocab)]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(weights), tuple(biases), tuple(vocab), leaky_slope)

    def astype(self, dtype) -> "MlpModel":
        return MlpModel(
            tuple(w.astype(dtype) for w in self.weights),
            tuple(b.astype(dtype) for b in self.biases),
            self.vocab,
            self.leaky_slope,
        )


@dataclass
class TrainConfig:
    batch_size: int = 128
    epochs: int = 15
    lr: float = 1e-2
    decay_epochs: tuple = (5, 10)
    decay_factor: float = 10.0
    momentum: float = 0.9
    seed: int = 0
    hidden: tuple = (512, 256)
    leaky_slope: float = 0.01
    resample_each_epoch: bool = True

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ContractError("need lr > 0, batch_size >= 1, epochs >= 1")
        if any(e < 1 for e in self.decay_epochs):
            raise ContractError(f"decay epochs {self.decay_epochs} must be positive")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for 0-based ``epoch``; divided at each milestone reached."""
        n = sum(1 for m in self.decay_epochs if epoch >= m)
        return self.lr / self.decay_factor**n


def _leaky(z, slope):
    return np.where(z > 0, z, slope * z)


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _affine_rowwise(x, w, b):
    return np.einsum("ij,kj->ik", x, w) + b


def forward_batch(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.in_dim:
        raise ShapeError(f"expected inputs of dim {model.in_dim}, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ContractError("non-finite input features")
    (A1, A2, A3, A4), (b1, b2, b3, b4) = model.weights, model.biases
    s = model.leaky_slope
    h1 = _leaky(_affine_rowwise(X, A1, b1), s) + X
    h2 = _leaky(_affine_rowwise(h1, A2, b2), s)
    h3 = _leaky(_affine_rowwise(h2, A3, b3), s)
    return _softmax(_affine_rowwise(h3, A4, b4))


def forward(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("forward expects a single feature vector")
    return forward_batch(model, x[None, :])[0]


def loss_and_grads(params: Sequence[np.ndarray], X: np.ndarray, y: np.ndarray, slope: float = 0.01):
    """Mean cross-entropy and its gradients w.r.t. ``[A1, b1, ..., A4, b4]``."""
    A1, b1, A2, b2, A3, b3, A4, b4 = params
    z1 = X @ A1.T + b1
    h1 = _leaky(z1, slope) + X
    z2 = h1 @ A2.T + b2
    h2 = _leaky(z2, slope)
    z3 = h2 @ A3.T + b3
    h3 = _leaky(z3, slope)
    logits = h3 @ A4.T + b4
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = X.shape[0]
    loss = -log_probs[np.arange(n), y].mean()

    d = np.exp(log_probs)
    d[np.arange(n), y] -= 1.0
    d /= n
    gA4, gb4 = d.T @ h3, d.sum(axis=0)
    d = (d @ A4) * np.where(z3 > 0, 1.0, slope)
    gA3, gb3 = d.T @ h2, d.sum(axis=0)
    d = (d @ A3) * np.where(z2 > 0, 1.0, slope)
    gA2, gb2 = d.T @ h1, d.sum(axis=0)
    d = (d @ A2) * np.where(z1 > 0, 1.0, slope)
    gA1, gb1 = d.T @ X, d.sum(axis=0)
    return loss, [gA1, gb1, gA2, gb2, gA3, gb3, gA4, gb4]


def _params(model: MlpModel) -> list:
    out = []
    for w, b in zip(model.weights, model.biases):
        out += [np.array(w, dtype=np.float64), np.array(b, dtype=np.float64)]
    return out


def _model(params, vocab, slope) -> MlpModel:
    return MlpModel(tuple(params[0::2]), tuple(params[1::2]), vocab, slope)


def sample_training_feature(spotting: Spotting, seq: FeatureSequence, rng) -> int:
    """A uniformly chosen position whose receptive field contains the spotting frame."""
    lo = -(-(spotting.frame - seq.receptive_field + 1) // seq.stride)
    lo = max(lo, 0)
    hi = min(spotting.frame // seq.stride, seq.length - 1)
    if lo > hi:
        return frame_to_feature_index(spotting.frame, seq)
    return int(rng.integers(lo, hi + 1))


def fit(
    sample_fn,
    labels: np.ndarray,
    in_dim: int,
    vocab: Sequence[str],
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[MlpModel, list[float]]:
    """Minibatch SGD with momentum on cross-entropy.

    ``sample_fn(epoch)`` returns the ``n x in_dim`` input matrix for an epoch.
    """
    model = MlpModel.init(in_dim, vocab, cfg.hidden, cfg.leaky_slope, rng)
    params = _params(model)
    velocity = [np.zeros_like(p) for p in params]
    history = []
    X = None
    n = labels.shape[0]
    for epoch in range(cfg.epochs):
        if X is None or cfg.resample_each_epoch:
            X = np.asarray(sample_fn(epoch), dtype=np.float64)
        lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(params, X[idx], labels[idx], cfg.leaky_slope)
            total += loss * idx.size
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v += g
                p -= lr * v
        history.append(total / n)
        log.debug("epoch %d lr %.1e loss %.6f", epoch, lr, history[-1])
    return _model(params, tuple(vocab), cfg.leaky_slope), history


def train(
    spottings: Sequence[Spotting],
    features: Mapping[str, FeatureSequence],
    vocab: Sequence[str],
    cfg: Optional[TrainConfig] = None,
) -> tuple[MlpModel, list[float]]:
    """Train on one randomly sampled covering feature per spotting."""
    cfg = cfg or TrainConfig()
    if not spottings:
        raise ContractError("empty training set")
    index = {w: i for i, w in enumerate(vocab)}
    missing = {s.keyword for s in spottings} - index.keys()
    if missing:
        raise ContractError(f"{len(missing)} training keywords outside the vocabulary, e.g. {sorted(missing)[:3]}")
    for s in spottings:
        if s.video_id not in features:
            raise ContractError(f"no features for video {s.video_id}")
    dims = {features[s.video_id].dim for s in spottings}
    if len(dims) != 1:
        raise ShapeError(f"training features have mixed dims {sorted(dims)}")
    labels = np.array([index[s.keyword] for s in spottings])
    rng = np.random.default_rng(cfg.seed)

    def sample(epoch):
        rows = []
        for s in spottings:
            seq = features[s.video_id]
            rows.append(seq.data[sample_training_feature(s, seq, rng)])
        return np.stack(rows)

    return fit(sample, labels, dims.pop(), vocab, cfg, rng)


def predict_sliding(model: MlpModel, seq: FeatureSequence) -> PredictionSequence:
    """One probability row per feature position."""
    if seq.dim != model.in_dim:
        raise ShapeError(f"model expects dim {model.in_dim}, sequence has {seq.dim}")
    return PredictionSequence(seq.video_id, seq.stride, forward_batch(model, seq.data), model.vocab)
