"""Gaussian log-likelihood (exact and Vecchia) and derivative-free maximum likelihood."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from ._parallel import map_blocks
from .errors import DenseCapExceeded, DomainError, MaxEvaluationsExceeded, NotPositiveDefinite
from .fields import Dataset, Design, rng_stream
from .linalg import cholesky, log_det, quadratic_form
from .simulate.models import CovarianceModel, Gneiting, Sites, model_from_params, sites_of
from .simulate.sampler import DENSE_CAP, build_covariance_matrix

LOG_2PI = math.log(2.0 * math.pi)
VECCHIA_CHUNK = 512


def log_likelihood(
    model: CovarianceModel, data: Dataset, dense_cap: int = DENSE_CAP, threads: int | None = None
) -> float:
    """Exact Gaussian log-likelihood of ``data`` (nugget included on the diagonal)."""
    model.check(data.design)
    n = len(data)
    if n > dense_cap:
        raise DenseCapExceeded(f"{n} rows exceed the dense cap of {dense_cap}; use the Vecchia likelihood")
    F = cholesky(build_covariance_matrix(model, data.design, nugget=True, threads=threads))
    r = data.values - model.mean(data.design)
    return -0.5 * n * LOG_2PI - 0.5 * log_det(F) - 0.5 * quadratic_form(F, r)


# -- neighbor graphs ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """Vecchia conditioning structure.

    ``order[i]`` is the original row index of the ``i``-th ordered point;
    ``neighbors[i, :counts[i]]`` are ordered positions (all ``< i``) it
    conditions on, nearest first.  Unused slots hold ``-1``.
    """

    order: np.ndarray
    neighbors: np.ndarray
    counts: np.ndarray
    rescale: tuple[float, ...] | None = None

    @property
    def n(self) -> int:
        return self.order.shape[0]

    @property
    def m(self) -> int:
        return self.neighbors.shape[1]

    def neighbor_rows(self, i: int) -> np.ndarray:
        """Original row indices that ordered point ``i`` conditions on."""
        return self.order[self.neighbors[i, : self.counts[i]]]


def _nearest_earlier_brute(f: np.ndarray, i: int, m: int) -> np.ndarray:
    if i == 0 or m == 0:
        return np.empty(0, dtype=np.int64)
    d = np.sqrt(np.sum((f[:i] - f[i]) ** 2, axis=1))
    pick = np.lexsort((np.arange(i), d))[:m]
    return pick.astype(np.int64)


def ordering_permutation(design: Design, rule: str = "sum", seed: int = 0) -> np.ndarray:
    n = len(design)
    if rule == "sum":
        key = design.coords[:, 0] + design.coords[:, 1]
        return np.argsort(key, kind="stable")
    if rule == "random":
        return rng_stream(seed, "vecchia-ordering").permutation(n)
    raise DomainError(f"unknown ordering rule {rule!r}")


def build_neighbor_graph(
    design: Design, m: int, rescale=None, ordering: str = "sum", seed: int = 0
) -> NeighborGraph:
    """Order the points and attach to each its ``m`` nearest predecessors.

    Distances are Euclidean on the (optionally rescaled) features, ``(x, y)``
    or ``(x, y, t)``; ties go to the smaller ordered position.
    """
    if m < 0:
        raise DomainError("neighbor count must be non-negative")
    n = len(design)
    order = ordering_permutation(design, ordering, seed)
    f = design.features(rescale)[order]
    m_eff = min(m, max(n - 1, 0))
    nbrs = np.full((n, m_eff), -1, dtype=np.int64)
    counts = np.minimum(np.arange(n), m_eff)
    if m_eff == 0:
        return NeighborGraph(order, nbrs, counts, None if rescale is None else tuple(rescale))

    # early points have few predecessors: brute force is cheapest there
    head = min(n, 4 * (m_eff + 1))
    for i in range(1, head):
        nbrs[i, : counts[i]] = _nearest_earlier_brute(f, i, m_eff)
    if head < n:
        tree = cKDTree(f)
        k = min(n, 4 * (m_eff + 1))
        _, cand = tree.query(f[head:], k=k)
        cand = np.atleast_2d(cand)
        for row, i in enumerate(range(head, n)):
            c = cand[row]
            c = c[c < i]
            if c.size > m_eff:
                d = np.sqrt(np.sum((f[c] - f[i]) ** 2, axis=1))
                sel = np.lexsort((c, d))
                cutoff = d[sel[m_eff]]
                # the candidate list must extend strictly past the m-th distance,
                # otherwise an equidistant earlier point could be missing
                if d[sel[m_eff - 1]] < cutoff:
                    nbrs[i] = c[sel[:m_eff]]
                    continue
            nbrs[i] = _nearest_earlier_brute(f, i, m_eff)
    return NeighborGraph(order, nbrs, counts, None if rescale is None else tuple(rescale))


# -- Vecchia likelihood ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Batch:
    positions: np.ndarray  # ordered positions of the conditioned points
    rows: np.ndarray  # (B, c + 1) original rows, conditioned point last
    sites: Sites
    pairs: tuple[np.ndarray, np.ndarray]  # upper-triangle index pairs within a block


class VecchiaPlan:
    """Model-independent gather of every conditioning block, reusable across evaluations."""

    def __init__(self, design: Design, graph: NeighborGraph):
        if graph.n != len(design):
            raise DomainError("neighbor graph was built on a different number of points")
        self.design = design
        self.graph = graph
        self.batches: list[_Batch] = []
        for c in np.unique(graph.counts):
            pos = np.flatnonzero(graph.counts == c)
            for s in range(0, pos.size, VECCHIA_CHUNK):
                p = pos[s : s + VECCHIA_CHUNK]
                blocks = np.concatenate([graph.neighbors[p, :c], p[:, None]], axis=1)
                rows = graph.order[blocks]
                iu = np.triu_indices(c + 1)
                self.batches.append(_Batch(p, rows, sites_of(design, rows), iu))


def _forward_last(L: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Last component of ``L^{-1} r`` for a stack of lower-triangular ``L``."""
    k = L.shape[-1]
    w = np.empty(r.shape)
    for j in range(k):
        acc = r[:, j] - np.einsum("bi,bi->b", L[:, j, :j], w[:, :j])
        w[:, j] = acc / L[:, j, j]
    return w[:, -1]


def _batch_cholesky(K: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return np.stack([cholesky(k).L for k in K])


def _batch_terms(model: CovarianceModel, batch: _Batch, resid: np.ndarray) -> np.ndarray:
    s = batch.sites
    ia, ib = batch.pairs
    a = Sites(s.coords[:, ia], None if s.t is None else s.t[:, ia], None if s.var is None else s.var[:, ia])
    b = Sites(s.coords[:, ib], None if s.t is None else s.t[:, ib], None if s.var is None else s.var[:, ib])
    vals = model.kernel(a, b)
    k = batch.rows.shape[1]
    K = np.empty((batch.rows.shape[0], k, k))
    K[:, ia, ib] = vals
    K[:, ib, ia] = vals
    if model.nugget > 0:
        K[:, np.arange(k), np.arange(k)] += model.nugget
    L = _batch_cholesky(K)
    w_last = _forward_last(L, resid[batch.rows])
    return -0.5 * LOG_2PI - np.log(L[:, -1, -1]) - 0.5 * w_last * w_last


def vecchia_log_likelihood(
    model: CovarianceModel,
    data: Dataset,
    graph: NeighborGraph,
    plan: VecchiaPlan | None = None,
    threads: int | None = None,
) -> float:
    """Sum over ordered points of the log-density of each value given its neighbors."""
    model.check(data.design)
    if plan is None:
        plan = VecchiaPlan(data.design, graph)
    resid = data.values - model.mean(data.design)
    terms = np.empty(graph.n)

    def run(b0, b1):
        for batch in plan.batches[b0:b1]:
            terms[batch.positions] = _batch_terms(model, batch, resid)

    map_blocks(run, len(plan.batches), 1, threads)
    if not np.all(np.isfinite(terms)):
        raise NotPositiveDefinite("a conditioning block is not positive definite")
    return float(np.sum(terms))


# -- parameter transforms ------------------------------------------------------------


def _logit(p):
    return math.log(p) - math.log1p(-p)


def _expit(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


_UNIT_CAP = 1.0 - 1e-12
TRANSFORMS = {
    "log": (math.log, math.exp),
    "unit": (lambda p: _logit(min(p, _UNIT_CAP)), _expit),
    "corr": (math.atanh, math.tanh),
    "angle": (lambda p: _logit(min(p / (math.pi / 2), _UNIT_CAP)), lambda x: (math.pi / 2) * _expit(x)),
}


def transform_kind(name: str) -> str:
    if name in ("alpha", "beta") or name.startswith("site_"):
        return "unit"
    if name == "beta12":
        return "corr"
    if name == "rotation":
        return "angle"
    return "log"


def to_unconstrained(params: dict[str, float]) -> dict[str, float]:
    return {k: TRANSFORMS[transform_kind(k)][0](v) for k, v in params.items()}


def from_unconstrained(values: dict[str, float]) -> dict[str, float]:
    return {k: TRANSFORMS[transform_kind(k)][1](v) for k, v in values.items()}


# -- fitting ----------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    max_evaluations: int = 2000
    tolerance: float = 1e-6
    initial_step: float = 0.5
    keep_trace: bool = False

    def __post_init__(self):
        if not (self.tolerance > 0 and self.max_evaluations > 0 and self.initial_step > 0):
            raise DomainError("optimizer settings must be positive")


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class Vecchia:
    m: int = 30
    ordering: str = "sum"
    seed: int = 0
    rescale: tuple[float, ...] | None = None


@dataclass
class FitResult:
    family: str
    params: dict[str, float]
    model: CovarianceModel
    loglik: float
    evaluations: int
    converged: bool
    likelihood: str
    trace: list[tuple[dict[str, float], float]] = field(default_factory=list)


DEFAULT_FIXED = {
    "nonstat": ("bandwidth", "rotation"),
    "flexible": ("tau_bar",),
}


def default_init(family: str, data: Dataset, options: dict[str, str] | None = None) -> dict[str, float]:
    """Crude moment-based starting values."""
    z = data.values
    var = float(np.var(z)) if z.size > 1 else 1.0
    var = var if var > 0 else 1.0
    if family == "nugget":
        return {"tau": math.sqrt(float(np.mean(z * z)) or 1.0)}
    if family == "matern":
        return {"sigma2": 0.9 * var, "range": 0.1, "smoothness": 0.5, "nugget": 0.1 * var}
    if family == "gneiting":
        return {
            "sigma2": 0.9 * var, "range_space": 0.1, "range_time": 0.5, "alpha": 0.5,
            "beta": 0.5, "smoothness": 0.5, "nugget": 0.1 * var,
        }
    if family in ("parsimonious", "flexible"):
        v = data.design.var
        v1 = float(np.var(z[v == 1])) or 1.0
        v2 = float(np.var(z[v == 2])) or 1.0
        out = {"sigma2_1": v1, "sigma2_2": v2, "beta12": 0.5, "smoothness_1": 0.5, "smoothness_2": 0.5}
        if family == "parsimonious":
            out["range"] = 0.1
        else:
            out.update(range_1=0.1, range_2=0.1, tau_bar=0.0)
        return out
    if family == "nonstat":
        from .kernels import COMPETITION_SITES

        out = {}
        for k, s in enumerate(COMPETITION_SITES, start=1):
            out.update(
                {f"sigma_{k}": math.sqrt(var), f"lambda1_{k}": 0.05, f"lambda2_{k}": 0.05,
                 f"site_x_{k}": s.location[0], f"site_y_{k}": s.location[1]}
            )
        out.update(bandwidth=0.09, rotation=math.pi / 2, smoothness=0.5, nugget=0.1 * var)
        return out
    raise DomainError(f"unknown model family {family!r}")


def _default_rescale(model: CovarianceModel):
    return model.rescale() if isinstance(model, Gneiting) else None


def fit_mle(
    family: str,
    data: Dataset,
    init: dict[str, float] | CovarianceModel | None = None,
    cfg: OptimizerConfig = OptimizerConfig(),
    likelihood: Exact | Vecchia = Exact(),
    fixed=None,
    options: dict[str, str] | None = None,
    threads: int | None = None,
) -> FitResult:
    """Maximize the (exact or Vecchia) log-likelihood with Nelder-Mead.

    The search runs in unconstrained coordinates: log for positive parameters,
    logit for those in (0, 1], atanh for correlations.  Names in ``fixed`` keep
    their initial value, as do positive parameters that start at exactly 0.
    """
    if isinstance(init, CovarianceModel):
        options = {**init.options(), **(options or {})}
        init = init.params()
    init = dict(default_init(family, data, options) if init is None else init)
    start_model = model_from_params(family, init, options)
    start_model.check(data.design)

    fixed = set(DEFAULT_FIXED.get(family, ()) if fixed is None else fixed)
    fixed |= {k for k, v in init.items() if transform_kind(k) == "log" and v == 0}
    fixed |= {k for k in init if k.startswith("site_")}
    free = [k for k in init if k not in fixed]

    if isinstance(likelihood, Vecchia):
        rescale = likelihood.rescale if likelihood.rescale is not None else _default_rescale(start_model)
        graph = build_neighbor_graph(data.design, likelihood.m, rescale, likelihood.ordering, likelihood.seed)
        plan = VecchiaPlan(data.design, graph)

        def loglik(model):
            return vecchia_log_likelihood(model, data, graph, plan, threads)

        label = f"vecchia:{likelihood.m}"
    else:

        def loglik(model):
            return log_likelihood(model, data, threads=threads)

        label = "exact"

    trace: list[tuple[dict[str, float], float]] = []
    best = {"ll": -math.inf, "params": dict(init), "model": start_model}
    evaluations = 0

    def params_at(x):
        p = dict(init)
        p.update(from_unconstrained(dict(zip(free, x))))
        return p

    def objective(x):
        nonlocal evaluations
        evaluations += 1
        p = params_at(x)
        try:
            model = model_from_params(family, p, options)
            ll = loglik(model)
        except (DomainError, NotPositiveDefinite, OverflowError, ValueError):
            return 1e300
        if not math.isfinite(ll):
            return 1e300
        if cfg.keep_trace:
            trace.append((p, ll))
        if ll > best["ll"]:
            best.update(ll=ll, params=p, model=model)
        return -ll

    if not free:
        objective(np.empty(0))
        return FitResult(family, best["params"], best["model"], best["ll"], evaluations, True, label, trace)

    x0 = np.array([to_unconstrained({k: init[k]})[k] for k in free])
    simplex = np.vstack([x0, x0 + cfg.initial_step * np.eye(len(free))])
    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "maxfev": cfg.max_evaluations,
            "maxiter": 10 * cfg.max_evaluations,
            "xatol": np.inf,
            "fatol": cfg.tolerance,
            "initial_simplex": simplex,
        },
    )
    converged = bool(res.status == 0)
    if not converged:
        warnings.warn(
            f"Nelder-Mead stopped after {evaluations} evaluations without converging",
            MaxEvaluationsExceeded,
            stacklevel=2,
        )
    if not math.isfinite(best["ll"]):
        raise NotPositiveDefinite("no parameter value visited gave a finite likelihood")
    return FitResult(family, best["params"], best["model"], best["ll"], evaluations, converged, label, trace)
