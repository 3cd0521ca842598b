"""One-hidden-layer networks with hand-derived gradients and plain SGD.

The prediction model is a feature map (hidden ReLU layer) composed with a
softmax classifier head. The domain discriminator is the same architecture
with one output per source domain. Gradients are analytic; an independent
finite-difference check lives in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyBatchError, EmptyPoolError, NumericError, ParameterError, ShapeError
from .mathutils import one_hot, softmax

CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    """Parameters of input -> ReLU hidden -> affine output."""

    w1: np.ndarray  # (hidden, in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (out, hidden)
    b2: np.ndarray  # (out,)
    seed: int | None = field(default=None, compare=False)  # init seed, checkpoint metadata

    def __post_init__(self):
        hidden, d = self.w1.shape
        out = self.w2.shape[0]
        if self.b1.shape != (hidden,) or self.w2.shape != (out, hidden) or self.b2.shape != (out,):
            raise ShapeError("inconsistent parameter shapes")
        for arr in (self.w1, self.b1, self.w2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise NumericError("parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(), self.seed)

    @classmethod
    def initialize(
        cls,
        in_dim: int,
        hidden_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        seed: int | None = None,
    ) -> "MlpParams":
        """Glorot-uniform weights, zero biases. Same generator state -> same params."""
        a1 = np.sqrt(6.0 / (in_dim + hidden_dim))
        a2 = np.sqrt(6.0 / (hidden_dim + out_dim))
        w1 = rng.uniform(-a1, a1, size=(hidden_dim, in_dim))
        w2 = rng.uniform(-a2, a2, size=(out_dim, hidden_dim))
        return cls(w1, np.zeros(hidden_dim), w2, np.zeros(out_dim), seed)


# The discriminator is structurally the same network; the alias marks intent.
DomainDiscriminator = MlpParams


@dataclass
class Gradients:
    """Mean-reduced gradients, shape-matched to an MlpParams."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "Gradients":
        return cls(
            np.zeros_like(params.w1),
            np.zeros_like(params.b1),
            np.zeros_like(params.w2),
            np.zeros_like(params.b2),
        )

    def scaled(self, c: float) -> "Gradients":
        return Gradients(c * self.w1, c * self.b1, c * self.w2, c * self.b2)

    def plus(self, other: "Gradients") -> "Gradients":
        return Gradients(
            self.w1 + other.w1, self.b1 + other.b1, self.w2 + other.w2, self.b2 + other.b2
        )

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a), initial=0.0)) for a in (self.w1, self.b1, self.w2, self.b2))


def _as_batch(x: np.ndarray, in_dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != in_dim:
        raise ShapeError(f"expected input of width {in_dim}, got shape {x.shape}")
    return X, single


def forward_features(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Hidden-layer activations ReLU(W1 x + b1); accepts one vector or a batch."""
    X, single = _as_batch(x, params.in_dim)
    h = np.maximum(X @ params.w1.T + params.b1, 0.0)
    return h[0] if single else h


def class_logits(params: MlpParams, x: np.ndarray) -> np.ndarray:
    X, single = _as_batch(x, params.in_dim)
    z = np.maximum(X @ params.w1.T + params.b1, 0.0) @ params.w2.T + params.b2
    return z[0] if single else z


def predict_class(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities softmax(W2 ReLU(W1 x + b1) + b2)."""
    return softmax(class_logits(params, x))


def predict_domain(disc: DomainDiscriminator, x: np.ndarray) -> np.ndarray:
    """Domain probabilities from the discriminator (same forward pass)."""
    return predict_class(disc, x)


def loss_gradients(
    params: MlpParams, xs: np.ndarray, targets: np.ndarray
) -> tuple[float, Gradients]:
    """Mean softmax cross-entropy over a batch and its analytic gradients.

    ``xs`` is (n, in_dim) and ``targets`` (n, out_dim) with soft rows
    summing to 1. Gradients use the standard identity
    d(loss)/d(logits) = (probs - targets) / n, valid away from the
    probability clamp.
    """
    xs = np.asarray(xs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise EmptyBatchError("loss_gradients needs a nonempty (n, d) batch")
    if targets.shape != (xs.shape[0], params.out_dim):
        raise ShapeError(f"targets shape {targets.shape} mismatches batch/out dims")

    n = xs.shape[0]
    z1 = xs @ params.w1.T + params.b1
    h = np.maximum(z1, 0.0)
    probs = softmax(h @ params.w2.T + params.b2)

    from .mathutils import PROB_EPS

    loss = float(-np.sum(targets * np.log(np.clip(probs, PROB_EPS, 1.0))) / n)

    dlogits = (probs - targets) / n
    dw2 = dlogits.T @ h
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ params.w2
    dz1 = dh * (z1 > 0.0)
    dw1 = dz1.T @ xs
    db1 = dz1.sum(axis=0)
    return loss, Gradients(dw1, db1, dw2, db2)


def sgd_step(
    params: MlpParams, grads: Gradients, lr_feature: float, lr_head: float
) -> MlpParams:
    """theta <- theta - lr * g; feature layer and head use separate rates."""
    if lr_feature <= 0 or lr_head <= 0:
        raise ParameterError("learning rates must be positive")
    for arr in (grads.w1, grads.b1, grads.w2, grads.b2):
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite gradients")
    return MlpParams(
        params.w1 - lr_feature * grads.w1,
        params.b1 - lr_feature * grads.b1,
        params.w2 - lr_head * grads.w2,
        params.b2 - lr_head * grads.b2,
        params.seed,
    )


def train_domain_discriminator(
    disc: DomainDiscriminator,
    features: np.ndarray,
    domains: np.ndarray,
    rng: np.random.Generator,
    epochs: int = 1,
    batch_size: int = 16,
    lr_feature: float = 0.003,
    lr_head: float = 0.01,
) -> tuple[DomainDiscriminator, list[float]]:
    """Minibatch SGD on cross-entropy of domain predictions vs domain labels.

    Returns the updated discriminator and the mean minibatch loss per epoch.
    With a single domain the softmax is identically 1, so every step is a
    no-op with zero loss.
    """
    features = np.asarray(features, dtype=np.float64)
    domains = np.asarray(domains, dtype=np.int64)
    n = features.shape[0]
    if n == 0:
        raise EmptyPoolError("cannot train discriminator on an empty pool")
    if domains.shape != (n,):
        raise ShapeError("one domain label per sample required")
    if domains.min() < 0 or domains.max() >= disc.out_dim:
        raise ShapeError("domain label outside discriminator output range")

    targets = np.stack([one_hot(int(k), disc.out_dim) for k in range(disc.out_dim)])
    trace: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grads = loss_gradients(disc, features[idx], targets[domains[idx]])
            disc = sgd_step(disc, grads, lr_feature, lr_head)
            losses.append(loss)
        trace.append(float(np.mean(losses)))
    return disc, trace


def save_checkpoint(params: MlpParams, path: str | Path) -> None:
    """Write a JSON checkpoint; floats round-trip bit-exactly."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "dims": [params.in_dim, params.hidden_dim, params.out_dim],
        "seed": params.seed,
        "w1": params.w1.tolist(),
        "b1": params.b1.tolist(),
        "w2": params.w2.tolist(),
        "b2": params.b2.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> MlpParams:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ShapeError(f"unsupported checkpoint version: {payload.get('version')!r}")
    params = MlpParams(
        np.asarray(payload["w1"], dtype=np.float64),
        np.asarray(payload["b1"], dtype=np.float64),
        np.asarray(payload["w2"], dtype=np.float64),
        np.asarray(payload["b2"], dtype=np.float64),
        payload.get("seed"),
    )
    if [params.in_dim, params.hidden_dim, params.out_dim] != payload["dims"]:
        raise ShapeError("checkpoint dims field mismatches stored arrays")
    return params
