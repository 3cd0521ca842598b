"""Semi-supervised generalization: reliable-set pseudo-labeling with a
growing inclusion fraction, feature-space MixUp within and across domains,
feature-space weak/strong augmentation, and the combined training loss.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptyBatchError,
    ModeUnavailable,
    ParameterError,
    ScheduleError,
)
from .exploration import CentroidSet, centroid_distances
from .mathutils import one_hot, sample_beta
from .model import Gradients, MlpParams, loss_gradients, predict_class
from .pools import Sample

log = logging.getLogger(__name__)

TRAINING_LOG_KEYS = (
    "epoch",
    "reliable_fraction",
    "reliable_count",
    "pseudo_label_accuracy",
    "loss_supervised",
    "loss_consistency",
    "loss_mixup",
    "loss_total",
)


@dataclass
class ThresholdSchedule:
    """Linear ramp of the reliable-set inclusion fraction over epochs."""

    initial_fraction: float
    final_fraction: float
    total_epochs: int

    def __post_init__(self):
        if not 0.0 <= self.initial_fraction <= self.final_fraction <= 1.0:
            raise ScheduleError(
                f"need 0 <= initial <= final <= 1, got "
                f"({self.initial_fraction}, {self.final_fraction})"
            )
        if self.total_epochs < 1:
            raise ScheduleError("schedule needs at least one epoch")

    def current(self, epoch: int) -> float:
        if not 0 <= epoch <= self.total_epochs:
            raise ScheduleError(f"epoch {epoch} outside [0, {self.total_epochs}]")
        span = self.final_fraction - self.initial_fraction
        return self.initial_fraction + span * epoch / self.total_epochs


@dataclass(frozen=True)
class ReliableSample:
    """Unlabeled sample close enough to a centroid to trust its pseudo label."""

    sample_id: int
    pseudo_class: int
    distance: float
    domain: int


@dataclass(frozen=True)
class MixedSample:
    """Convex combination of two samples' features and one-hot pseudo labels."""

    features: np.ndarray
    soft_label: np.ndarray
    lam: float
    origin_domains: tuple[int, int]


def build_reliable_set(
    model: MlpParams,
    centroids: CentroidSet,
    unlabeled: Sequence[Sample],
    fraction: float,
) -> list[ReliableSample]:
    """The floor(fraction * n) unlabeled samples nearest to any centroid.

    Pseudo class = class of the nearest centroid; equidistant centroids
    resolve to the lexicographically smallest (domain, class) cell. Result
    is ordered nearest-first, ties by ascending id.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"fraction must be in [0, 1], got {fraction}")
    if not unlabeled:
        return []
    keys, _ = centroids.stacked()
    ids = np.array([s.id for s in unlabeled])
    xs = np.stack([s.features for s in unlabeled])
    dists = centroid_distances(model, centroids, xs)
    min_dist = dists.min(axis=1)
    nearest = dists.argmin(axis=1)  # first occurrence = smallest (domain, class)
    count = int(np.floor(fraction * len(unlabeled)))
    order = np.lexsort((ids, min_dist))[:count]
    domains = {s.id: s.domain for s in unlabeled}
    return [
        ReliableSample(
            sample_id=int(ids[i]),
            pseudo_class=int(keys[nearest[i]][1]),
            distance=float(min_dist[i]),
            domain=domains[int(ids[i])],
        )
        for i in order
    ]


def _by_domain(reliable: Sequence[ReliableSample]) -> dict[int, list[ReliableSample]]:
    groups: dict[int, list[ReliableSample]] = {}
    for r in sorted(reliable, key=lambda r: r.sample_id):
        groups.setdefault(r.domain, []).append(r)
    return groups


def sample_mix_pair(
    reliable: Sequence[ReliableSample],
    by_id: Mapping[int, Sample],
    num_classes: int,
    mode: str,
    alpha: float,
    rng: np.random.Generator,
    lam: float | None = None,
) -> MixedSample:
    """Draw one MixUp pair from the reliable set.

    ``intra`` mixes two distinct samples of one domain, ``inter`` one
    sample from each of two distinct domains. The mixing weight is drawn
    once from Beta(alpha, alpha) and shared by features and labels;
    ``lam`` overrides the draw for reproducing a specific mix.
    """
    if mode not in ("intra", "inter"):
        raise ConfigError(f"mix mode must be 'intra' or 'inter', got {mode!r}")
    groups = _by_domain(reliable)
    if mode == "intra":
        eligible = sorted(d for d, members in groups.items() if len(members) >= 2)
        if not eligible:
            raise ModeUnavailable("no domain has two reliable samples")
        domain = eligible[int(rng.integers(len(eligible)))]
        i, j = rng.choice(len(groups[domain]), size=2, replace=False)
        first, second = groups[domain][int(i)], groups[domain][int(j)]
    else:
        eligible = sorted(groups)
        if len(eligible) < 2:
            raise ModeUnavailable("need reliable samples in two distinct domains")
        m = eligible[int(rng.integers(len(eligible)))]
        rest = [d for d in eligible if d != m]
        n_dom = rest[int(rng.integers(len(rest)))]
        first = groups[m][int(rng.integers(len(groups[m])))]
        second = groups[n_dom][int(rng.integers(len(groups[n_dom])))]
    if lam is None:
        lam = sample_beta(alpha, rng)
    x = lam * by_id[first.sample_id].features + (1.0 - lam) * by_id[second.sample_id].features
    y = lam * one_hot(first.pseudo_class, num_classes) + (1.0 - lam) * one_hot(
        second.pseudo_class, num_classes
    )
    return MixedSample(x, y, float(lam), (first.domain, second.domain))


def mixed_batch(
    reliable: Sequence[ReliableSample],
    by_id: Mapping[int, Sample],
    num_classes: int,
    size: int,
    alpha: float,
    rng: np.random.Generator,
) -> list[MixedSample]:
    """Batch of mixed samples: half intra / half inter when both modes have
    an eligible pair, all from the available mode otherwise, empty if none.
    """
    groups = _by_domain(reliable)
    intra_ok = any(len(m) >= 2 for m in groups.values())
    inter_ok = len(groups) >= 2
    if not intra_ok and not inter_ok:
        return []
    if intra_ok and inter_ok:
        plan = ["intra"] * (size // 2) + ["inter"] * (size - size // 2)
    else:
        plan = ["intra" if intra_ok else "inter"] * size
    return [
        sample_mix_pair(reliable, by_id, num_classes, mode, alpha, rng) for mode in plan
    ]


@dataclass
class Augmenter:
    """Feature-space stand-ins for weak/strong input augmentation.

    Weak adds Gaussian noise scaled per dimension by the training std;
    strong uses a larger scale and then zeroes coordinates independently.
    """

    feature_std: np.ndarray
    sigma_weak: float = 0.05
    sigma_strong: float = 0.2
    mask_prob: float = 0.3

    @classmethod
    def from_features(
        cls,
        features: np.ndarray,
        sigma_weak: float = 0.05,
        sigma_strong: float = 0.2,
        mask_prob: float = 0.3,
    ) -> "Augmenter":
        std = np.asarray(features, dtype=np.float64).std(axis=0)
        return cls(std, sigma_weak, sigma_strong, mask_prob)

    def weak(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x + rng.standard_normal(x.shape) * (self.sigma_weak * self.feature_std)

    def strong(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        noisy = x + rng.standard_normal(x.shape) * (self.sigma_strong * self.feature_std)
        mask = rng.random(x.shape) >= self.mask_prob
        return noisy * mask


def augment_views(
    x: np.ndarray, augmenter: Augmenter, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Weak and strong views of a batch (weak drawn first)."""
    return augmenter.weak(x, rng), augmenter.strong(x, rng)


@dataclass
class LossWeights:
    """Weights of the combined loss; supervised and consistency are fixed at 1."""

    mixup_weight: float = 0.3
    confidence_threshold: float = 0.95

    def __post_init__(self):
        if self.mixup_weight < 0:
            raise ParameterError("mixup weight must be >= 0")
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ParameterError("confidence threshold must be in (0, 1]")


def supervised_loss(
    model: MlpParams, xs: np.ndarray, labels: Sequence[int], num_classes: int
) -> tuple[float, Gradients]:
    """Mean cross-entropy against revealed one-hot labels."""
    if len(labels) == 0:
        raise EmptyBatchError("supervised loss needs a nonempty labeled batch")
    targets = np.stack([one_hot(int(c), num_classes) for c in labels])
    return loss_gradients(model, np.atleast_2d(xs), targets)


def consistency_loss_from_views(
    model: MlpParams,
    weak_x: np.ndarray,
    strong_x: np.ndarray,
    threshold: float,
) -> tuple[float, Gradients, int]:
    """Consistency loss given fixed weak/strong views.

    A sample contributes the cross-entropy between its strong-view
    prediction and the one-hot argmax of its weak-view prediction iff the
    weak-view confidence reaches ``threshold``. The mean is taken over the
    whole batch, counting gated-out samples; the weak-view pseudo label is
    a constant, so gradients flow only through the strong view.
    """
    weak_x = np.atleast_2d(weak_x)
    strong_x = np.atleast_2d(strong_x)
    if weak_x.shape != strong_x.shape:
        raise ConfigError("weak and strong views must pair up")
    n = weak_x.shape[0]
    if n == 0:
        return 0.0, Gradients.zeros_like(model), 0
    weak_p = np.atleast_2d(predict_class(model, weak_x))
    conf = weak_p.max(axis=1)
    pseudo = weak_p.argmax(axis=1)
    mask = conf >= threshold
    k = int(mask.sum())
    if k == 0:
        return 0.0, Gradients.zeros_like(model), 0
    targets = np.stack([one_hot(int(c), model.out_dim) for c in pseudo[mask]])
    sub_loss, sub_grads = loss_gradients(model, strong_x[mask], targets)
    factor = k / n
    return sub_loss * factor, sub_grads.scaled(factor), k


def consistency_loss(
    model: MlpParams,
    xs: np.ndarray,
    threshold: float,
    augmenter: Augmenter,
    rng: np.random.Generator,
) -> tuple[float, Gradients, int]:
    """Draw augmented views, then apply the fixed-view consistency loss."""
    weak_x, strong_x = augment_views(np.atleast_2d(xs), augmenter, rng)
    return consistency_loss_from_views(model, weak_x, strong_x, threshold)


def mixup_loss(
    model: MlpParams, mixed: Sequence[MixedSample]
) -> tuple[float, Gradients]:
    """Mean soft-target cross-entropy over a mixed batch; empty batch -> 0."""
    if not mixed:
        return 0.0, Gradients.zeros_like(model)
    xs = np.stack([m.features for m in mixed])
    targets = np.stack([m.soft_label for m in mixed])
    return loss_gradients(model, xs, targets)


def combined_loss(
    model: MlpParams,
    labeled_x: np.ndarray,
    labeled_y: Sequence[int],
    num_classes: int,
    unlabeled_x: np.ndarray | None,
    mixed: Sequence[MixedSample],
    weights: LossWeights,
    augmenter: Augmenter,
    rng: np.random.Generator,
) -> tuple[float, Gradients, dict]:
    """Supervised + consistency + weighted mixup loss with summed gradients.

    Unavailable components (empty batches) contribute exactly 0 and are
    reported in the returned breakdown.
    """
    if len(labeled_y):
        l_sup, g = supervised_loss(model, labeled_x, labeled_y, num_classes)
    else:
        log.debug("combined loss: empty labeled batch, supervised term skipped")
        l_sup, g = 0.0, Gradients.zeros_like(model)
    if unlabeled_x is not None and len(np.atleast_2d(unlabeled_x)):
        l_con, g_con, n_conf = consistency_loss(
            model, unlabeled_x, weights.confidence_threshold, augmenter, rng
        )
        g = g.plus(g_con)
    else:
        log.debug("combined loss: no unlabeled batch, consistency term skipped")
        l_con, n_conf = 0.0, 0
    l_mix, g_mix = mixup_loss(model, mixed)
    if mixed:
        g = g.plus(g_mix.scaled(weights.mixup_weight))
    else:
        log.debug("combined loss: empty mixed batch, mixup term skipped")
    total = l_sup + l_con + weights.mixup_weight * l_mix
    breakdown = {
        "supervised": l_sup,
        "consistency": l_con,
        "mixup": l_mix,
        "n_confident": n_conf,
    }
    return total, g, breakdown


def append_training_log(path: str | Path, record: dict) -> None:
    """Append one epoch record to the JSON-lines training log."""
    missing = [k for k in TRAINING_LOG_KEYS if k not in record]
    if missing:
        raise ConfigError(f"training log record missing keys: {missing}")
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
