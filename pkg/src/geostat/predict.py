"""Simple kriging: exact, nearest-neighbor ("local"), and T10 forecasting.

Kriging here uses the model's own mean (simple kriging). Cross covariances
between targets and training rows never include the nugget, so a target that
coincides with a training row gets the smooth-signal predictor; target
variances do include the nugget, i.e. they are variances for a fresh noisy
observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._parallel import map_blocks
from .errors import DenseCapExceeded, DomainError, EmptyInput, NotPositiveDefinite
from .fields import Dataset, Design, Kind
from .linalg import cholesky, solve, solve_lower
from .simulate.models import CovarianceModel, Gneiting, sites_of
from .simulate.sampler import DENSE_CAP, build_covariance_matrix

TARGET_BLOCK = 256
LOCAL_BUDGET = 1 << 22  # doubles per gathered neighbor block stack


@dataclass(frozen=True)
class Prediction:
    index: int
    mean: float
    variance: float


@dataclass(frozen=True, eq=False)
class Predictions:
    design: Design
    mean: np.ndarray
    variance: np.ndarray

    def __len__(self) -> int:
        return self.mean.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield Prediction(i, float(self.mean[i]), float(self.variance[i]))


def _clamp_variance(var: np.ndarray, prior: np.ndarray) -> np.ndarray:
    # round-off allowance grows with the prior variance; anything beyond it is a broken model
    tol = 1e-10 + 1e-8 * np.abs(prior)
    if np.any(var < -tol):
        worst = float(np.min(var))
        raise NotPositiveDefinite(f"negative kriging variance {worst:g}; covariance model is not valid")
    return np.maximum(var, 0.0)


def _check(model: CovarianceModel, train: Dataset, targets: Design) -> None:
    if len(train) == 0:
        raise EmptyInput("training set is empty")
    model.check(train.design)
    model.check(targets)


def exact_kriging(
    model: CovarianceModel,
    train: Dataset,
    targets: Design,
    dense_cap: int = DENSE_CAP,
    threads: int | None = None,
) -> Predictions:
    _check(model, train, targets)
    if len(train) > dense_cap:
        raise DenseCapExceeded(f"{len(train)} training rows exceed the dense cap of {dense_cap}; use local kriging")
    F = cholesky(build_covariance_matrix(model, train.design, nugget=True, threads=threads))
    weights = solve(F, train.values - model.mean(train.design))
    T = len(targets)
    mean = np.array(model.mean(targets), dtype=np.float64)
    prior = model.variance(targets)
    reduction = np.empty(T)
    train_sites = sites_of(train.design).expand(1)

    def run(t0, t1):
        c = model.kernel(train_sites, sites_of(targets, np.arange(t0, t1)).expand(0))
        mean[t0:t1] += c.T @ weights
        V = solve_lower(F, c)
        reduction[t0:t1] = np.einsum("ij,ij->j", V, V)

    map_blocks(run, T, TARGET_BLOCK, threads)
    var = _clamp_variance(prior - reduction, prior)
    return Predictions(targets, mean, var)


def default_rescale(model: CovarianceModel):
    return model.rescale() if isinstance(model, Gneiting) else None


def nearest_rows(train_features: np.ndarray, target_features: np.ndarray, m: int) -> np.ndarray:
    """Indices of the ``m`` nearest training rows per target, nearest first, ties by index."""
    n = train_features.shape[0]
    k = min(m, n)
    tree = cKDTree(train_features)
    kq = min(n, k + 8)
    _, idx = tree.query(target_features, k=kq)
    idx = np.asarray(idx).reshape(len(target_features), kq)
    d = np.sqrt(((train_features[idx] - target_features[:, None, :]) ** 2).sum(-1))
    order = np.lexsort((idx, d), axis=-1)
    return np.take_along_axis(idx, order, axis=-1)[:, :k]


def local_kriging(
    model: CovarianceModel,
    train: Dataset,
    targets: Design,
    m: int,
    rescale=None,
    threads: int | None = None,
    candidates: np.ndarray | None = None,
) -> Predictions:
    """Kriging on each target's ``m`` nearest training rows.

    Distances use ``(x, y)`` or ``(x, y, t)`` scaled per axis by ``rescale``
    (space-time models default to their own correlation ranges).  Bivariate
    neighbors come from both variables' rows.  ``candidates`` optionally limits
    the training rows eligible as neighbors.
    """
    if m < 1:
        raise DomainError("need at least one neighbor")
    _check(model, train, targets)
    if rescale is None:
        rescale = default_rescale(model)
    pool = np.arange(len(train)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if pool.size == 0:
        raise EmptyInput("no eligible training rows")
    k = min(m, pool.size)
    feats = train.design.features(rescale)[pool]
    nbr = pool[nearest_rows(feats, targets.features(rescale), k)]

    resid = train.values - model.mean(train.design)
    mean = np.array(model.mean(targets), dtype=np.float64)
    prior = model.variance(targets)
    reduction = np.empty(len(targets))
    chunk = max(1, LOCAL_BUDGET // (k * k))
    diag = np.arange(k)

    def run(t0, t1):
        rows = nbr[t0:t1]
        s = sites_of(train.design, rows)
        K = model.kernel(s.expand(2), s.expand(1))
        if model.nugget > 0:
            K[:, diag, diag] += model.nugget
        c = model.kernel(s, sites_of(targets, np.arange(t0, t1)).expand(1))
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            L = np.stack([cholesky(b).L for b in K])
        y = np.linalg.solve(L, np.stack([c, resid[rows]], axis=-1))
        mean[t0:t1] += np.einsum("bi,bi->b", y[..., 0], y[..., 1])
        reduction[t0:t1] = np.einsum("bi,bi->b", y[..., 0], y[..., 0])

    map_blocks(run, len(targets), chunk, threads)
    var = _clamp_variance(prior - reduction, prior)
    return Predictions(targets, mean, var)


def forecast_t10(
    model: CovarianceModel,
    train: Dataset,
    targets: Design,
    m: int = 30,
    recent_slots: int = 10,
    rescale=None,
    threads: int | None = None,
) -> Predictions:
    """Local kriging that only conditions on the most recent ``recent_slots`` training slots."""
    if train.kind is not Kind.SPACETIME or targets.kind is not Kind.SPACETIME:
        raise DomainError("forecasting needs space-time data")
    slots = np.unique(train.design.t)
    keep = slots[-recent_slots:]
    pool = np.flatnonzero(np.isin(train.design.t, keep))
    return local_kriging(model, train, targets, m, rescale=rescale, threads=threads, candidates=pool)
