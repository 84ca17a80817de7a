"""Competition metrics: RMSE per dataset, MCRMSE per sub-competition, leaderboards."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, DuplicateName, EmptyInput, RowKeyMismatch
from .fields import Design, Kind

KEY_DECIMALS = 12


def rmse(predicted, truth) -> float:
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise DimensionMismatch(f"{p.size} predictions for {t.size} truth values")
    if p.size == 0:
        raise EmptyInput("nothing to score")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(t))):
        raise DomainError("non-finite values in scoring input")
    r = p - t
    return math.sqrt(float(r @ r) / r.size)


def mcrmse(values) -> float:
    v = [float(x) for x in values]
    if not v:
        raise EmptyInput("no datasets to average")
    return math.fsum(v) / len(v)


@dataclass(frozen=True)
class DatasetScore:
    name: str
    rmse: float
    n_test: int


@dataclass(frozen=True)
class ScoreReport:
    per_dataset: tuple[DatasetScore, ...]
    mcrmse: float

    @classmethod
    def build(cls, scores) -> "ScoreReport":
        scores = tuple(scores)
        if any(s.n_test < 1 for s in scores):
            raise EmptyInput("every dataset needs at least one test row")
        return cls(scores, mcrmse(s.rmse for s in scores))

    def to_text(self) -> str:
        lines = [f"rmse.{s.name} = {s.rmse!r}\nn_test.{s.name} = {s.n_test}" for s in self.per_dataset]
        lines.append(f"mcrmse = {self.mcrmse!r}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["dataset,rmse,n_test"] + [f"{s.name},{s.rmse!r},{s.n_test}" for s in self.per_dataset]
        rows.append(f"MCRMSE,{self.mcrmse!r},{sum(s.n_test for s in self.per_dataset)}")
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class Standing:
    rank: int
    name: str
    mcrmse: float


def leaderboard(entries) -> list[Standing]:
    """Ascending by score, name breaking ties; tied scores share the smaller rank."""
    entries = [(str(name), float(score)) for name, score in entries]
    names = [n for n, _ in entries]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateName(f"duplicate leaderboard names: {', '.join(dup)}")
    ordered = sorted(entries, key=lambda e: (e[1], e[0]))
    out = []
    for pos, (name, score) in enumerate(ordered, start=1):
        rank = out[-1].rank if out and out[-1].mcrmse == score else pos
        out.append(Standing(rank, name, score))
    return out


# -- joining submissions to truth -------------------------------------------------


def row_keys(design: Design) -> list[tuple]:
    """Hashable per-row keys: rounded coordinates plus time or variable index."""
    xy = np.round(design.coords, KEY_DECIMALS) + 0.0  # folds -0.0 into 0.0
    cols = [xy[:, 0].tolist(), xy[:, 1].tolist()]
    if design.kind is Kind.SPACETIME:
        cols.append(design.t.tolist())
    elif design.kind is Kind.BIVARIATE:
        cols.append(design.var.tolist())
    return list(zip(*cols))


def align(submission: Design, truth: Design) -> np.ndarray:
    """Permutation ``p`` such that submission row ``p[i]`` matches truth row ``i``."""
    if submission.kind is not truth.kind:
        raise RowKeyMismatch(f"submission is {submission.kind.value}, truth is {truth.kind.value}")
    sub_keys = row_keys(submission)
    where = {}
    for i, k in enumerate(sub_keys):
        if k in where:
            raise RowKeyMismatch(f"submission repeats row key {k}")
        where[k] = i
    truth_keys = row_keys(truth)
    missing = [k for k in truth_keys if k not in where]
    if missing:
        raise RowKeyMismatch(f"{len(missing)} truth rows have no prediction, first {missing[0]}")
    if len(sub_keys) != len(truth_keys):
        raise RowKeyMismatch(f"submission has {len(sub_keys) - len(truth_keys)} rows not in the truth")
    return np.array([where[k] for k in truth_keys], dtype=np.int64)


def score_dataset(name: str, submission: Design, zhat, truth: Design, z) -> DatasetScore:
    perm = align(submission, truth)
    zhat = np.asarray(zhat, dtype=np.float64)[perm]
    return DatasetScore(name, rmse(zhat, z), len(truth))
