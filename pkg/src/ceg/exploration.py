"""Active-exploration scoring: uncertainty, domain representativeness,
diversity against labeled-data centroids, rank fusion, and batch selection.

Raw scores are never compared across criteria; only their rankings are
fused, so any strictly increasing rescoring of one criterion leaves the
selected batch unchanged. Every ranking and selection breaks ties by
ascending sample id.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BudgetError,
    ConfigError,
    DegenerateVectorError,
    EmptyKnowledgeError,
    ShapeError,
)
from .model import MlpParams, forward_features, predict_class, predict_domain
from .pools import Sample

BASELINE_STRATEGIES = ("uniform", "entropy", "bvsb", "confidence", "coreset")

SCORE_CSV_HEADER = (
    "id",
    "uncertainty",
    "representativeness",
    "diversity",
    "uncertainty_rank",
    "representativeness_rank",
    "diversity_rank",
    "fused",
    "selected",
)


@dataclass
class CentroidSet:
    """Mean hidden-layer embedding per (domain, class) cell with labeled data."""

    entries: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def sorted_keys(self) -> list[tuple[int, int]]:
        return sorted(self.entries)

    def stacked(self) -> tuple[list[tuple[int, int]], np.ndarray]:
        """Centroid matrix with rows in lexicographic (domain, class) order."""
        keys = self.sorted_keys()
        if not keys:
            raise EmptyKnowledgeError("no centroids available")
        return keys, np.stack([self.entries[k] for k in keys])


@dataclass
class QueryScores:
    """Per-unlabeled-sample scores, rankings, and the fused rank sum."""

    ids: np.ndarray  # ascending sample ids
    uncertainty: np.ndarray
    representativeness: np.ndarray
    diversity: np.ndarray
    uncertainty_rank: np.ndarray | None = None
    representativeness_rank: np.ndarray | None = None
    diversity_rank: np.ndarray | None = None
    fused: np.ndarray | None = None


def uncertainty_score(model: MlpParams, x: np.ndarray) -> float | np.ndarray:
    """1 minus the top-two prediction margin; 0 = confident, 1 = ambiguous."""
    if model.out_dim < 2:
        raise ConfigError("uncertainty needs at least 2 classes")
    p = predict_class(model, x)
    top2 = np.sort(p, axis=-1)[..., -2:]
    s = 1.0 - (top2[..., 1] - top2[..., 0])
    return float(s) if np.ndim(s) == 0 else s


def representativeness_score(disc: MlpParams, x: np.ndarray) -> float | np.ndarray:
    """Maximum domain probability; high = typical of one source domain."""
    p = predict_domain(disc, x)
    s = np.max(p, axis=-1)
    return float(s) if np.ndim(s) == 0 else s


def compute_centroids(
    model: MlpParams, samples: Sequence[Sample], labels: Mapping[int, int]
) -> CentroidSet:
    """Exact mean of hidden embeddings, grouped by (domain, revealed class)."""
    if not samples:
        raise EmptyKnowledgeError("cannot build centroids from an empty labeled pool")
    xs = np.stack([s.features for s in samples])
    emb = forward_features(model, xs)
    groups: dict[tuple[int, int], list[int]] = {}
    for row, s in enumerate(samples):
        if s.id not in labels:
            raise ConfigError(f"sample {s.id} has no revealed label")
        groups.setdefault((s.domain, labels[s.id]), []).append(row)
    entries = {cell: emb[rows].mean(axis=0) for cell, rows in groups.items()}
    return CentroidSet(entries)


def centroid_distances(
    model: MlpParams, centroids: CentroidSet, x: np.ndarray
) -> np.ndarray:
    """Cosine distances between hidden embeddings of ``x`` and every centroid.

    Rows follow the input batch; columns follow lexicographic (domain,
    class) order of the centroid cells.
    """
    keys, c = centroids.stacked()
    emb = np.atleast_2d(forward_features(model, x))
    emb_norm = np.linalg.norm(emb, axis=1)
    c_norm = np.linalg.norm(c, axis=1)
    if np.any(emb_norm == 0.0):
        raise DegenerateVectorError("zero-norm embedding; cosine distance undefined")
    if np.any(c_norm == 0.0):
        raise DegenerateVectorError("zero-norm centroid; cosine distance undefined")
    sim = (emb / emb_norm[:, None]) @ (c / c_norm[:, None]).T
    return np.clip(1.0 - sim, 0.0, 2.0)


def diversity_score(
    model: MlpParams, centroids: CentroidSet, x: np.ndarray
) -> float | np.ndarray:
    """Distance to the nearest centroid; high = far from known knowledge."""
    d = centroid_distances(model, centroids, x).min(axis=1)
    return float(d[0]) if np.ndim(x) == 1 else d


def rank_descending(values: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Ranks 1..n with rank 1 on the highest value; ties by ascending id."""
    values = np.asarray(values, dtype=np.float64)
    ids = np.asarray(ids)
    if values.shape != ids.shape:
        raise ShapeError("one id per value required")
    order = np.lexsort((ids, -values))
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def fuse_ranks(
    scores: QueryScores,
    gamma1: float,
    gamma2: float,
    use_uncertainty: bool = True,
    use_representativeness: bool = True,
    use_diversity: bool = True,
) -> QueryScores:
    """Fill rankings and the fused rank sum; smaller fused value = better.

    Disabled criteria contribute weight 0 (their ranks are still computed
    for reporting).
    """
    n = len(scores.ids)
    for arr in (scores.uncertainty, scores.representativeness, scores.diversity):
        if len(arr) != n:
            raise ConfigError("score arrays must cover every unlabeled sample")
    scores.uncertainty_rank = rank_descending(scores.uncertainty, scores.ids)
    scores.representativeness_rank = rank_descending(scores.representativeness, scores.ids)
    scores.diversity_rank = rank_descending(scores.diversity, scores.ids)
    scores.fused = (
        (1.0 if use_uncertainty else 0.0) * scores.uncertainty_rank
        + gamma1 * (1.0 if use_representativeness else 0.0) * scores.representativeness_rank
        + gamma2 * (1.0 if use_diversity else 0.0) * scores.diversity_rank
    ).astype(np.float64)
    return scores


def select_query_batch(ids: np.ndarray, fused: np.ndarray, quota: int) -> list[int]:
    """The ``quota`` ids with smallest fused value, ties by ascending id."""
    ids = np.asarray(ids)
    fused = np.asarray(fused, dtype=np.float64)
    if quota < 0 or quota > len(ids):
        raise BudgetError(f"quota {quota} outside [0, {len(ids)}]")
    order = np.lexsort((ids, fused))
    return [int(i) for i in ids[order[:quota]]]


def entropy_scores(model: MlpParams, x: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(predict_class(model, x))
    return -np.sum(p * np.log(np.clip(p, 1e-12, 1.0)), axis=1)


def confidence_scores(model: MlpParams, x: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(predict_class(model, x))
    return 1.0 - np.max(p, axis=1)


def bvsb_scores(model: MlpParams, x: np.ndarray) -> np.ndarray:
    """Best-versus-second-best margin uncertainty (same quantity as
    :func:`uncertainty_score`)."""
    return np.atleast_1d(uncertainty_score(model, np.atleast_2d(x)))


def coreset_selection(
    ids: np.ndarray,
    embeddings: np.ndarray,
    labeled_embeddings: np.ndarray,
    quota: int,
) -> tuple[list[int], dict[int, float]]:
    """Greedy farthest-first k-center picks, seeded by the labeled set.

    Euclidean distances on the embeddings. With no labeled seeds the first
    pick falls to the tie-break (lowest id). Returns the picked ids in
    selection order plus each pick's covering distance at pick time.
    """
    ids = np.asarray(ids)
    n = len(ids)
    if quota < 0 or quota > n:
        raise BudgetError(f"quota {quota} outside [0, {n}]")
    if labeled_embeddings.size:
        diff = embeddings[:, None, :] - labeled_embeddings[None, :, :]
        min_dist = np.sqrt((diff**2).sum(axis=2)).min(axis=1)
    else:
        min_dist = np.full(n, np.inf)
    taken = np.zeros(n, dtype=bool)
    picks: list[int] = []
    pick_dist: dict[int, float] = {}
    for _ in range(quota):
        masked = np.where(taken, -np.inf, min_dist)
        best = masked.max()
        # first index achieving the max = lowest id (ids are ascending)
        row = int(np.flatnonzero(masked == best)[0])
        taken[row] = True
        picks.append(int(ids[row]))
        pick_dist[int(ids[row])] = float(min_dist[row])
        d_new = np.sqrt(((embeddings - embeddings[row]) ** 2).sum(axis=1))
        min_dist = np.minimum(min_dist, d_new)
    return picks, pick_dist


def baseline_select(
    strategy: str,
    model: MlpParams,
    unlabeled_ids: np.ndarray,
    unlabeled_x: np.ndarray,
    labeled_x: np.ndarray,
    quota: int,
    rng: np.random.Generator,
) -> tuple[list[int], dict[int, float] | None]:
    """Select a query batch with one of the classic strategies.

    Score-based strategies pick the ``quota`` highest scores (ties by
    ascending id) and return the scores of the picked ids as snapshot;
    ``uniform`` returns no snapshot.
    """
    if strategy not in BASELINE_STRATEGIES:
        raise ConfigError(
            f"unknown strategy {strategy!r}; expected one of {BASELINE_STRATEGIES}"
        )
    ids = np.asarray(unlabeled_ids)
    if quota < 0 or quota > len(ids):
        raise BudgetError(f"quota {quota} outside [0, {len(ids)}]")
    if strategy == "uniform":
        picked = [int(i) for i in rng.permutation(ids)[:quota]]
        return picked, None
    if strategy == "coreset":
        emb = forward_features(model, unlabeled_x)
        lab_emb = (
            forward_features(model, labeled_x) if len(labeled_x) else np.empty((0, model.hidden_dim))
        )
        return coreset_selection(ids, np.atleast_2d(emb), np.atleast_2d(lab_emb), quota)
    scorer = {
        "entropy": entropy_scores,
        "bvsb": bvsb_scores,
        "confidence": confidence_scores,
    }[strategy]
    s = scorer(model, unlabeled_x)
    order = np.lexsort((ids, -s))
    picked = [int(i) for i in ids[order[:quota]]]
    return picked, {pid: float(s[np.flatnonzero(ids == pid)[0]]) for pid in picked}


def round_quotas(total_budget: int, initial_budget: int, rounds: int) -> list[int]:
    """Split the post-initialization budget evenly over the query rounds.

    Earlier rounds absorb the remainder, so the quotas are nonincreasing
    and sum to ``total_budget - initial_budget``.
    """
    if rounds < 1:
        raise ConfigError("need at least one query round")
    if initial_budget > total_budget:
        raise BudgetError("initial budget exceeds total budget")
    base, rem = divmod(total_budget - initial_budget, rounds)
    return [base + 1] * rem + [base] * (rounds - rem)


def write_scores_csv(
    path: str | Path, scores: QueryScores, selected: Sequence[int]
) -> None:
    """Dump one query round's scores/ranks with a selected flag per id."""
    if scores.fused is None:
        raise ConfigError("fuse_ranks must run before the score dump")
    chosen = set(int(i) for i in selected)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SCORE_CSV_HEADER)
        for i, sid in enumerate(scores.ids):
            w.writerow(
                [
                    int(sid),
                    repr(float(scores.uncertainty[i])),
                    repr(float(scores.representativeness[i])),
                    repr(float(scores.diversity[i])),
                    int(scores.uncertainty_rank[i]),
                    int(scores.representativeness_rank[i]),
                    int(scores.diversity_rank[i]),
                    repr(float(scores.fused[i])),
                    int(int(sid) in chosen),
                ]
            )
