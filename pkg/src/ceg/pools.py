"""Labeled/unlabeled pool bookkeeping, the labeling oracle, and the budget ledger.

The true class of a sample is stored on the Sample but is only read by the
oracle (here) and the evaluator; scoring and training code sees classes
exclusively through ``PoolState.labeled``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BudgetError, ConfigError, DoubleQueryError

QUERY_LOG_KEYS = ("epoch", "ids", "scores_snapshot", "spent")


@dataclass(frozen=True)
class Sample:
    """One feature vector with its domain index and hidden true class."""

    id: int
    features: np.ndarray
    domain: int
    hidden_class: int


@dataclass
class BudgetLedger:
    """Hard annotation budget; ``spent`` never exceeds ``total``."""

    total: int
    initial: int
    spent: int = 0

    def __post_init__(self):
        if not 0 <= self.initial <= self.total:
            raise BudgetError(f"initial budget {self.initial} outside [0, {self.total}]")
        if not 0 <= self.spent <= self.total:
            raise BudgetError(f"spent {self.spent} outside [0, {self.total}]")

    @property
    def remaining(self) -> int:
        return self.total - self.spent

    def charge(self, count: int) -> None:
        if count < 0:
            raise BudgetError("cannot charge a negative count")
        if self.spent + count > self.total:
            raise BudgetError(
                f"query of {count} would exceed budget ({self.spent}/{self.total} spent)"
            )
        self.spent += count


@dataclass
class PoolState:
    """Disjoint labeled (id -> revealed class) and unlabeled (ids) sets."""

    labeled: dict[int, int] = field(default_factory=dict)
    unlabeled: set[int] = field(default_factory=set)

    @classmethod
    def all_unlabeled(cls, samples: Sequence[Sample]) -> "PoolState":
        ids = [s.id for s in samples]
        if len(set(ids)) != len(ids):
            raise ConfigError("sample ids must be unique")
        return cls(labeled={}, unlabeled=set(ids))

    @property
    def n_labeled(self) -> int:
        return len(self.labeled)

    @property
    def n_unlabeled(self) -> int:
        return len(self.unlabeled)

    def labeled_ids(self) -> list[int]:
        return sorted(self.labeled)

    def unlabeled_ids(self) -> list[int]:
        return sorted(self.unlabeled)

    def check_invariants(self, n_total: int | None = None) -> None:
        overlap = self.labeled.keys() & self.unlabeled
        if overlap:
            raise ConfigError(f"labeled/unlabeled overlap: {sorted(overlap)[:5]}")
        if n_total is not None and self.n_labeled + self.n_unlabeled != n_total:
            raise ConfigError(
                f"pool sizes {self.n_labeled}+{self.n_unlabeled} != dataset size {n_total}"
            )


def init_labeled_pool(
    samples: Sequence[Sample], ledger: BudgetLedger, rng: np.random.Generator
) -> PoolState:
    """Reveal ``ledger.initial`` labels drawn uniformly without replacement."""
    pool = PoolState.all_unlabeled(samples)
    if ledger.initial > len(samples):
        raise BudgetError(
            f"initial budget {ledger.initial} exceeds dataset size {len(samples)}"
        )
    by_id = {s.id: s for s in samples}
    chosen = rng.choice(pool.unlabeled_ids(), size=ledger.initial, replace=False)
    for sid in sorted(int(i) for i in chosen):
        pool.unlabeled.remove(sid)
        pool.labeled[sid] = by_id[sid].hidden_class
    ledger.spent = ledger.initial
    return pool


def query_oracle(
    pool: PoolState,
    ids: Iterable[int],
    ledger: BudgetLedger,
    by_id: Mapping[int, Sample],
) -> None:
    """Reveal the true classes of ``ids``, charging the ledger.

    Validates the whole request first; on any violation the pool and
    ledger are left untouched.
    """
    ids = [int(i) for i in ids]
    if len(set(ids)) != len(ids):
        raise DoubleQueryError("duplicate ids in one query")
    for sid in ids:
        if sid in pool.labeled:
            raise DoubleQueryError(f"sample {sid} is already labeled")
        if sid not in pool.unlabeled:
            raise ConfigError(f"sample {sid} is not in the unlabeled pool")
    if ledger.spent + len(ids) > ledger.total:
        raise BudgetError(
            f"query of {len(ids)} would exceed budget ({ledger.spent}/{ledger.total} spent)"
        )
    ledger.charge(len(ids))
    for sid in ids:
        pool.unlabeled.remove(sid)
        pool.labeled[sid] = by_id[sid].hidden_class


def append_query_log(path: str | Path, record: dict) -> None:
    """Append one query-round record to a JSON-lines log."""
    missing = [k for k in QUERY_LOG_KEYS if k not in record]
    if missing:
        raise ConfigError(f"query log record missing keys: {missing}")
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_query_log(path: str | Path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]
