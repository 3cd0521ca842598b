"""Numeric substrate: softmax, cross-entropy, cosine distance, Beta draws,
and seedable named RNG streams.

All functions are pure. Vector arguments are 1-D float64 arrays; the
batched helpers in other modules stack them row-wise.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateVectorError, NumericError, ParameterError, ShapeError

PROB_EPS = 1e-12  # clamp applied to probabilities before logarithms


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator fully determined by ``(seed, name)``.

    Two streams built from the same pair yield byte-identical draw
    sequences; distinct names give statistically independent streams.
    """
    if seed < 0:
        raise ParameterError(f"stream seed must be >= 0, got {seed}")
    key = np.random.SeedSequence(seed, spawn_key=tuple(name.encode("utf-8")))
    return np.random.default_rng(key)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis.

    Accepts a single logit vector or a batch of rows; output rows sum to 1.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise ShapeError("softmax needs at least one logit")
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax received non-finite logits")
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(pred: np.ndarray, target: np.ndarray) -> float:
    """Cross-entropy -sum(target * log(pred)) with soft targets.

    ``pred`` is clamped to [PROB_EPS, 1] before the log, so a saturated
    prediction never produces -inf. One-hot targets are the special case.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"pred shape {p.shape} != target shape {t.shape}")
    logp = np.log(np.clip(p, PROB_EPS, 1.0))
    return float(-np.sum(t * logp, axis=-1).mean())


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), in [0, 2]. Raises on zero-norm input."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("cosine distance undefined for zero-norm vector")
    d = 1.0 - float(np.dot(a, b) / (na * nb))
    return float(min(max(d, 0.0), 2.0))


def sample_beta(alpha: float, rng: np.random.Generator) -> float:
    """One draw from Beta(alpha, alpha); symmetric around 1/2."""
    if not alpha > 0:
        raise ParameterError(f"beta shape parameter must be > 0, got {alpha}")
    return float(rng.beta(alpha, alpha))


def one_hot(index: int, length: int) -> np.ndarray:
    """Unit probability vector with mass on ``index``."""
    if not 0 <= index < length:
        raise ShapeError(f"one-hot index {index} out of range for length {length}")
    v = np.zeros(length, dtype=np.float64)
    v[index] = 1.0
    return v
