"""The covariance-model union and its textual spec form.

Each model exposes a broadcasting ``kernel`` over :class:`Sites` (the smooth,
nugget-free part), a scalar ``nugget`` added on covariance diagonals only,
and a ``mean`` surface.  ``family`` plus ``params()`` round-trip through
:func:`model_from_params`, which is what the fitting code and the CLI use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .. import kernels as K
from ..errors import DomainError, KindMismatch
from ..fields import Design, Kind


class Sites(NamedTuple):
    """Site attributes with arbitrary (broadcastable) leading shape."""

    coords: np.ndarray
    t: np.ndarray | None = None
    var: np.ndarray | None = None

    def expand(self, axis: int) -> "Sites":
        return Sites(
            np.expand_dims(self.coords, axis if axis >= 0 else axis - 1),
            None if self.t is None else np.expand_dims(self.t, axis),
            None if self.var is None else np.expand_dims(self.var, axis),
        )


def sites_of(design: Design, idx=None) -> Sites:
    if idx is None:
        return Sites(design.coords, design.t, design.var)
    idx = np.asarray(idx, dtype=np.int64)
    return Sites(
        design.coords[idx],
        None if design.t is None else design.t[idx],
        None if design.var is None else design.var[idx],
    )


def _distance(a: Sites, b: Sites) -> np.ndarray:
    d = a.coords - b.coords
    return np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])


class CovarianceModel:
    kind: Kind = Kind.SPATIAL
    family: str = ""

    @property
    def nugget(self) -> float:
        return 0.0

    def kernel(self, a: Sites, b: Sites) -> np.ndarray:
        raise NotImplementedError

    def mean(self, design: Design) -> np.ndarray:
        return np.zeros(len(design))

    def params(self) -> dict[str, float]:
        raise NotImplementedError

    def options(self) -> dict[str, str]:
        return {}

    def check(self, design: Design) -> None:
        if design.kind is not self.kind:
            raise KindMismatch(f"{self.family} model expects {self.kind.value} data, got {design.kind.value}")

    def cross_cov(self, a: Design, b: Design) -> np.ndarray:
        """Signal covariance between every row of ``a`` and every row of ``b`` (no nugget)."""
        self.check(a)
        self.check(b)
        return self.kernel(sites_of(a).expand(1), sites_of(b).expand(0))

    def variance(self, design: Design) -> np.ndarray:
        """Total pointwise variance including the nugget."""
        self.check(design)
        s = sites_of(design)
        return self.kernel(s, s) + self.nugget

    def spec(self) -> str:
        return model_to_spec(self)


@dataclass(frozen=True)
class MeanPlusNugget(CovarianceModel):
    """Deterministic mean surface plus white noise of standard deviation ``tau``."""

    surface: K.MeanSurface = K.MeanSurface.ZERO
    tau: float = 1.0
    kind = Kind.SPATIAL
    family = "nugget"

    def __post_init__(self):
        object.__setattr__(self, "surface", K.MeanSurface(self.surface))
        if not self.tau >= 0:
            raise DomainError("tau must be non-negative")

    @property
    def nugget(self) -> float:
        return self.tau * self.tau

    def kernel(self, a, b):
        return np.zeros(np.broadcast_shapes(a.coords.shape[:-1], b.coords.shape[:-1]))

    def mean(self, design):
        return np.asarray(K.mean_surface_eval(self.surface, design.coords), dtype=np.float64).reshape(-1)

    def params(self):
        return {"tau": self.tau}

    def options(self):
        return {"mean": self.surface.value}


@dataclass(frozen=True)
class StationaryMatern(CovarianceModel):
    p: K.MaternParams
    kind = Kind.SPATIAL
    family = "matern"

    @property
    def nugget(self):
        return self.p.nugget

    def kernel(self, a, b):
        h = _distance(a, b)
        return self.p.sigma2 * K.matern_correlation(self.p.smoothness, h / self.p.range)

    def params(self):
        p = self.p
        return {"sigma2": p.sigma2, "range": p.range, "smoothness": p.smoothness, "nugget": p.nugget}


@dataclass(frozen=True)
class NonstatMatern(CovarianceModel):
    m: K.NonstatMaternModel
    kind = Kind.SPATIAL
    family = "nonstat"

    @property
    def nugget(self):
        return self.m.nugget

    def kernel(self, a, b):
        fa = K._local_fields(self.m, a.coords)
        fb = K._local_fields(self.m, b.coords)
        return np.asarray(K._nonstat_from_fields(self.m, a.coords, b.coords, fa, fb, nugget=False))

    def params(self):
        out = {}
        for k, s in enumerate(self.m.sites, start=1):
            out[f"sigma_{k}"] = s.sigma
            out[f"lambda1_{k}"] = s.lambda1
            out[f"lambda2_{k}"] = s.lambda2
            out[f"site_x_{k}"] = s.location[0]
            out[f"site_y_{k}"] = s.location[1]
        out.update(
            bandwidth=self.m.bandwidth,
            rotation=self.m.rotation,
            smoothness=self.m.smoothness,
            nugget=self.m.nugget,
        )
        return out


@dataclass(frozen=True)
class Gneiting(CovarianceModel):
    p: K.GneitingParams
    kind = Kind.SPACETIME
    family = "gneiting"

    @property
    def nugget(self):
        return self.p.nugget

    def kernel(self, a, b):
        return np.asarray(K.gneiting_cov(self.p, _distance(a, b), a.t - b.t))

    def params(self):
        p = self.p
        return {
            "sigma2": p.sigma2,
            "range_space": p.range_space,
            "range_time": p.range_time,
            "alpha": p.alpha,
            "beta": p.beta,
            "smoothness": p.smoothness,
            "nugget": p.nugget,
        }

    def rescale(self) -> tuple[float, float, float]:
        """Per-axis factors making one unit of rescaled distance comparable in space and time.

        Time enters the correlation through ``a_t |u|^(2 alpha)``, so the
        natural time unit is ``a_t^(-1/(2 alpha))`` slots.
        """
        p = self.p
        return (1.0 / p.range_space, 1.0 / p.range_space, p.range_time ** (1.0 / (2.0 * p.alpha)))


@dataclass(frozen=True)
class BivariateMatern(CovarianceModel):
    p: K.BivariateMaternParams
    kind = Kind.BIVARIATE

    @property
    def family(self):
        return self.p.flavor.value

    def kernel(self, a, b):
        return K.bivariate_matern_cov_indexed(self.p, _distance(a, b), a.var, b.var)

    def params(self):
        p = self.p
        out = {
            "sigma2_1": p.sigma2_1,
            "sigma2_2": p.sigma2_2,
            "beta12": p.beta12,
            "smoothness_1": p.smoothness_1,
            "smoothness_2": p.smoothness_2,
        }
        if p.flavor is K.BivariateFlavor.PARSIMONIOUS:
            out["range"] = p.range_1
        else:
            out.update(range_1=p.range_1, range_2=p.range_2, tau_bar=p.tau_bar)
        return out


FAMILIES = ("nugget", "matern", "nonstat", "gneiting", "parsimonious", "flexible")


def model_from_params(family: str, params: dict[str, float], options: dict[str, str] | None = None) -> CovarianceModel:
    options = options or {}
    P = {k: float(v) for k, v in params.items()}
    try:
        if family == "nugget":
            return MeanPlusNugget(K.MeanSurface(options.get("mean", "zero")), P["tau"])
        if family == "matern":
            return StationaryMatern(K.MaternParams(P["sigma2"], P["range"], P["smoothness"], P.get("nugget", 0.0)))
        if family == "gneiting":
            return Gneiting(
                K.GneitingParams(
                    P["sigma2"], P["range_space"], P["range_time"], P["alpha"], P["beta"],
                    P["smoothness"], P.get("nugget", 0.0),
                )
            )
        if family == "parsimonious":
            a = P["range"]
            return BivariateMatern(
                K.BivariateMaternParams(
                    K.BivariateFlavor.PARSIMONIOUS, P["sigma2_1"], P["sigma2_2"], P["beta12"],
                    P["smoothness_1"], P["smoothness_2"], a, a,
                )
            )
        if family == "flexible":
            return BivariateMatern(
                K.BivariateMaternParams(
                    K.BivariateFlavor.FLEXIBLE, P["sigma2_1"], P["sigma2_2"], P["beta12"],
                    P["smoothness_1"], P["smoothness_2"], P["range_1"], P["range_2"], P.get("tau_bar", 0.0),
                )
            )
        if family == "nonstat":
            m = 1
            while f"sigma_{m + 1}" in P:
                m += 1
            sites = [
                K.ReferenceSite(
                    (P[f"site_x_{k}"], P[f"site_y_{k}"]), P[f"sigma_{k}"], P[f"lambda1_{k}"], P[f"lambda2_{k}"]
                )
                for k in range(1, m + 1)
            ]
            return NonstatMatern(
                K.NonstatMaternModel(
                    tuple(sites), P.get("bandwidth", 0.09), P.get("rotation", math.pi / 2),
                    P["smoothness"], P.get("nugget", 0.0),
                )
            )
    except KeyError as e:
        raise DomainError(f"{family} model is missing parameter {e.args[0]!r}") from None
    raise DomainError(f"unknown model family {family!r}; expected one of {', '.join(FAMILIES)}")


def model_to_spec(model: CovarianceModel) -> str:
    items = [f"{k}={v}" for k, v in model.options().items()]
    items += [f"{k}={float(v)!r}" for k, v in model.params().items()]
    return f"{model.family}:" + ",".join(items)


def parse_model_spec(text: str) -> CovarianceModel:
    """Parse ``family:key=value,key=value`` (the form written by :func:`model_to_spec`)."""
    family, _, body = text.strip().partition(":")
    params, options = {}, {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise DomainError(f"malformed model parameter {item!r}")
        key, value = key.strip(), value.strip()
        try:
            params[key] = float(value)
        except ValueError:
            options[key] = value
    return model_from_params(family.strip().lower(), params, options)
