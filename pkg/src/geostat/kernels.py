"""Covariance functions, mean surfaces and the special functions behind them.

Every kernel here broadcasts over NumPy arrays: points are arrays whose last
axis holds the ``(x, y)`` coordinates, distances and lags are plain arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, kv, kve

from .errors import BadBracket, DomainError, Unbounded, VariableIndexOutOfRange

BESSEL_NU_MAX = 10.0
BESSEL_X_MIN = 1e-10
BESSEL_X_MAX = 100.0


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, ``K_nu(x)``.

    Supported on ``0 < nu <= 10`` and ``1e-10 < x <= 100``.
    """
    nu_a = np.asarray(nu, dtype=np.float64)
    x_a = np.asarray(x, dtype=np.float64)
    if np.any(~(nu_a > 0)) or np.any(nu_a > BESSEL_NU_MAX):
        raise DomainError(f"order must lie in (0, {BESSEL_NU_MAX:g}]")
    if np.any(~(x_a > BESSEL_X_MIN)) or np.any(x_a > BESSEL_X_MAX):
        raise DomainError(f"argument must lie in ({BESSEL_X_MIN:g}, {BESSEL_X_MAX:g}]")
    out = kv(nu_a, x_a)
    return float(out) if out.ndim == 0 else out


def matern_correlation(nu, r):
    """Matern correlation ``r**nu K_nu(r) / (2**(nu-1) Gamma(nu))`` with value 1 at 0."""
    if not nu > 0:
        raise DomainError("smoothness must be positive")
    r = np.asarray(r, dtype=np.float64)
    out = np.ones(r.shape)
    pos = r > 0
    if np.any(pos):
        rp = r[pos]
        # log-space: K_nu(r) = kve(nu, r) e^{-r}
        with np.errstate(divide="ignore", over="ignore"):
            scaled = kve(nu, rp)
            logm = math.log(2.0) + nu * np.log(rp / 2.0) + np.log(scaled) - rp - gammaln(nu)
            val = np.exp(logm)
        # kve overflows where r is so small that the correlation is 1 to double precision,
        # and gives nan for enormous r, where the correlation has long underflowed
        bad = ~np.isfinite(scaled)
        val[bad] = np.where(rp[bad] < 1.0, 1.0, 0.0)
        out[pos] = np.minimum(val, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MaternParams:
    sigma2: float
    range: float
    smoothness: float
    nugget: float = 0.0

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.range > 0 and self.smoothness > 0 and self.nugget >= 0):
            raise DomainError(f"invalid Matern parameters {self}")


def stationary_matern_cov(p: MaternParams, h):
    h = np.asarray(h, dtype=np.float64)
    out = p.sigma2 * np.asarray(matern_correlation(p.smoothness, h / p.range)) + p.nugget * (h == 0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GneitingParams:
    """Non-separable space-time Matern (Gneiting class).

    ``nugget`` is an optional extra white-noise variance; the published
    configurations all use 0.
    """

    sigma2: float
    range_space: float
    range_time: float
    alpha: float
    beta: float
    smoothness: float
    nugget: float = 0.0

    def __post_init__(self):
        ok = (
            self.sigma2 > 0
            and self.range_space > 0
            and self.range_time > 0
            and 0 < self.alpha <= 1
            and 0 < self.beta <= 1
            and self.smoothness > 0
            and self.nugget >= 0
        )
        if not ok:
            raise DomainError(f"invalid Gneiting parameters {self}")


def gneiting_temporal_factor(range_time: float, alpha: float, u):
    """``1 / (a_t |u|^(2 alpha) + 1)``: the pure-time correlation of the Gneiting model."""
    u = np.abs(np.asarray(u, dtype=np.float64))
    return 1.0 / (range_time * u ** (2.0 * alpha) + 1.0)


def gneiting_cov(p: GneitingParams, h, u):
    h = np.asarray(h, dtype=np.float64)
    u = np.abs(np.asarray(u, dtype=np.float64))
    psi = p.range_time * u ** (2.0 * p.alpha) + 1.0
    r = (h / p.range_space) / psi ** (p.beta / 2.0)
    out = p.sigma2 / psi * np.asarray(matern_correlation(p.smoothness, r))
    return float(out) if out.ndim == 0 else out


# -- nonstationary Matern --------------------------------------------------------


@dataclass(frozen=True)
class ReferenceSite:
    location: tuple[float, float]
    sigma: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        x, y = self.location
        if not (0 <= x <= 1 and 0 <= y <= 1):
            raise DomainError(f"reference site {self.location} outside the unit square")
        if not (self.sigma > 0 and self.lambda1 > 0 and self.lambda2 > 0):
            raise DomainError("reference-site parameters must be positive")


@dataclass(frozen=True)
class NonstatMaternModel:
    sites: tuple[ReferenceSite, ...]
    bandwidth: float = 0.09
    rotation: float = math.pi / 2
    smoothness: float = 0.7
    nugget: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        if len(self.sites) < 1:
            raise DomainError("need at least one reference site")
        if not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        if not 0 <= self.rotation <= math.pi / 2:
            raise DomainError("rotation must lie in [0, pi/2]")
        if not (self.smoothness > 0 and self.nugget >= 0):
            raise DomainError("invalid smoothness or nugget")

    @property
    def site_locations(self) -> np.ndarray:
        return np.array([s.location for s in self.sites], dtype=np.float64)

    def site_values(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.sites], dtype=np.float64)


COMPETITION_SITES = tuple(
    ReferenceSite(loc, sigma, lam, lam)
    for loc, sigma, lam in zip(
        [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)],
        [3.5, 1.9, 1.8, 0.7],
        [0.03, 0.07, 0.1, 0.3],
    )
)


def nonstat_weights(m: NonstatMaternModel, s) -> np.ndarray:
    """Normalized Gaussian-kernel weights of each reference site, shape ``(..., M)``.

    The kernel is ``exp(-|s - s_k|^2 / (2 h))`` with ``h`` the bandwidth itself,
    not its square.
    """
    s = np.asarray(s, dtype=np.float64)
    d2 = np.sum((s[..., None, :] - m.site_locations) ** 2, axis=-1)
    logk = -d2 / (2.0 * m.bandwidth)
    # subtract the row max so distant points do not underflow every weight
    logk = logk - np.max(logk, axis=-1, keepdims=True)
    k = np.exp(logk)
    return k / np.sum(k, axis=-1, keepdims=True)


def _local_fields(m: NonstatMaternModel, s):
    """Local sigma and the three distinct entries ``(a, b, c)`` of the 2x2 kernel matrix."""
    w = nonstat_weights(m, s)
    sigma = w @ m.site_values("sigma")
    l1 = w @ m.site_values("lambda1")
    l2 = w @ m.site_values("lambda2")
    c, s_ = math.cos(m.rotation), math.sin(m.rotation)
    # R diag(l1, l2) R^T with R = [[c, -s], [s, c]]
    a = c * c * l1 + s_ * s_ * l2
    b = c * s_ * (l1 - l2)
    d = s_ * s_ * l1 + c * c * l2
    return sigma, a, b, d


def local_params(m: NonstatMaternModel, s) -> tuple[float, np.ndarray]:
    """Local standard deviation and 2x2 kernel matrix at a single point."""
    sigma, a, b, d = _local_fields(m, np.asarray(s, dtype=np.float64).reshape(2))
    return float(sigma), np.array([[a, b], [b, d]])


def nonstat_matern_cov(m: NonstatMaternModel, si, sj, nugget: bool = True):
    """Nonstationary Matern covariance between broadcastable point arrays.

    With ``nugget=True`` the nugget is added where the two points coincide.
    """
    si = np.asarray(si, dtype=np.float64)
    sj = np.asarray(sj, dtype=np.float64)
    sig_i, ai, bi, ci = _local_fields(m, si)
    sig_j, aj, bj, cj = _local_fields(m, sj)
    return _nonstat_from_fields(m, si, sj, (sig_i, ai, bi, ci), (sig_j, aj, bj, cj), nugget)


def _nonstat_from_fields(m, si, sj, fi, fj, nugget):
    sig_i, ai, bi, ci = fi
    sig_j, aj, bj, cj = fj
    A = 0.5 * (ai + aj)
    B = 0.5 * (bi + bj)
    C = 0.5 * (ci + cj)
    det_avg = A * C - B * B
    det_i = ai * ci - bi * bi
    det_j = aj * cj - bj * bj
    dx = si[..., 0] - sj[..., 0]
    dy = si[..., 1] - sj[..., 1]
    q = (C * dx * dx - 2.0 * B * dx * dy + A * dy * dy) / det_avg
    q = np.maximum(q, 0.0)
    r = 2.0 * np.sqrt(m.smoothness * q)
    pref = sig_i * sig_j * (det_i * det_j) ** 0.25 / np.sqrt(det_avg)
    out = pref * np.asarray(matern_correlation(m.smoothness, r))
    if nugget and m.nugget > 0:
        out = out + m.nugget * np.all(si == sj, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# -- bivariate Matern --------------------------------------------------------------


class BivariateFlavor(str, Enum):
    PARSIMONIOUS = "parsimonious"
    FLEXIBLE = "flexible"


def parsimonious_rho(nu11: float, nu22: float, beta12: float, d: int = 2) -> float:
    """Collocated correlation implied by the parsimonious Matern smoothness constraint."""
    if not (nu11 > 0 and nu22 > 0):
        raise DomainError("smoothness must be positive")
    nu12 = 0.5 * (nu11 + nu22)
    half = d / 2.0
    log_ratio = (
        0.5 * (gammaln(nu11 + half) - gammaln(nu11))
        + 0.5 * (gammaln(nu22 + half) - gammaln(nu22))
        + gammaln(nu12)
        - gammaln(nu12 + half)
    )
    return float(beta12 * math.exp(log_ratio))


@dataclass(frozen=True)
class BivariateMaternParams:
    flavor: BivariateFlavor
    sigma2_1: float
    sigma2_2: float
    beta12: float
    smoothness_1: float
    smoothness_2: float
    range_1: float
    range_2: float
    tau_bar: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "flavor", BivariateFlavor(self.flavor))
        ok = (
            self.sigma2_1 > 0
            and self.sigma2_2 > 0
            and -1 < self.beta12 < 1
            and self.smoothness_1 > 0
            and self.smoothness_2 > 0
            and self.range_1 > 0
            and self.range_2 > 0
            and self.tau_bar >= 0
        )
        if not ok:
            raise DomainError(f"invalid bivariate Matern parameters {self}")
        if self.flavor is BivariateFlavor.PARSIMONIOUS and self.range_1 != self.range_2:
            raise DomainError("parsimonious model needs a common range")

    @property
    def rho12(self) -> float:
        return parsimonious_rho(self.smoothness_1, self.smoothness_2, self.beta12)

    @property
    def cross_range(self) -> float:
        if self.flavor is BivariateFlavor.PARSIMONIOUS:
            return self.range_1
        a1, a2 = self.range_1, self.range_2
        return math.sqrt(0.5 * (a1 * a1 + a2 * a2) + self.tau_bar * (a1 - a2) ** 2)

    def table(self):
        """2x2 tables of (rho * sigma_i * sigma_j, smoothness, range) for each variable pair."""
        s1, s2 = math.sqrt(self.sigma2_1), math.sqrt(self.sigma2_2)
        nu12 = 0.5 * (self.smoothness_1 + self.smoothness_2)
        scale = np.array([[self.sigma2_1, self.rho12 * s1 * s2], [self.rho12 * s1 * s2, self.sigma2_2]])
        nu = np.array([[self.smoothness_1, nu12], [nu12, self.smoothness_2]])
        a12 = self.cross_range
        rng = np.array([[self.range_1, a12], [a12, self.range_2]])
        return scale, nu, rng


def bivariate_matern_cov(p: BivariateMaternParams, h, i: int, j: int):
    """Cross-covariance ``C_ij(h)`` between variables ``i`` and ``j`` (1-based)."""
    if i not in (1, 2) or j not in (1, 2):
        raise VariableIndexOutOfRange(f"variable indices must be 1 or 2, got ({i}, {j})")
    scale, nu, rng = p.table()
    h = np.asarray(h, dtype=np.float64)
    out = scale[i - 1, j - 1] * np.asarray(matern_correlation(nu[i - 1, j - 1], h / rng[i - 1, j - 1]))
    return float(out) if out.ndim == 0 else out


def bivariate_matern_cov_indexed(p: BivariateMaternParams, h, vi, vj):
    """Vectorized ``C_{vi,vj}(h)`` for arrays of 1-based variable indices."""
    h = np.asarray(h, dtype=np.float64)
    vi = np.asarray(vi)
    vj = np.asarray(vj)
    h, vi, vj = np.broadcast_arrays(h, vi, vj)
    if np.any((vi != 1) & (vi != 2)) or np.any((vj != 1) & (vj != 2)):
        raise VariableIndexOutOfRange("variable indices must be 1 or 2")
    scale, nu, rng = p.table()
    out = np.empty(h.shape)
    for a in (1, 2):
        for b in (1, 2):
            sel = (vi == a) & (vj == b)
            if np.any(sel):
                out[sel] = scale[a - 1, b - 1] * matern_correlation(nu[a - 1, b - 1], h[sel] / rng[a - 1, b - 1])
    return out


# -- mean surfaces ---------------------------------------------------------------


class MeanSurface(str, Enum):
    ZERO = "zero"
    MEAN1A = "mean1a"
    MEAN1B = "mean1b"


def mean_surface_eval(kind, s):
    kind = MeanSurface(kind)
    s = np.asarray(s, dtype=np.float64)
    x, y = s[..., 0], s[..., 1]
    u = 0.5 * (x + y)
    if kind is MeanSurface.ZERO:
        out = np.zeros(x.shape)
    elif kind is MeanSurface.MEAN1A:
        out = (
            5.0 * np.sin(30.0 * (u - 0.9) ** 3) * np.cos(20.0 * (u - 0.9) ** 4)
            + 0.5 * np.exp(np.sin(30.0 * x) + np.sin(13.0 * y))
            + 0.5 * (u - 0.2)
        )
    else:
        out = (
            3.0 * np.sin(20.0 * (u + 1.9)) * np.cos(20.0 * (u - 1.2) ** 6)
            + 0.6 * np.exp(np.sin(25.0 * x) + np.sin(13.0 * y))
            + 0.5 * (u - 0.2)
        )
    return float(out) if out.ndim == 0 else out


# -- effective range ---------------------------------------------------------------


def effective_range(
    correlation: Callable[[float], float],
    threshold: float = 0.05,
    bracket: Sequence[float] = (0.0, 100.0),
    tol: float = 1e-6,
) -> float:
    """Distance at which a non-increasing correlation falls to ``threshold``.

    Raises :class:`Unbounded` when the correlation is still above the threshold
    at the upper end of the bracket.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise BadBracket(f"empty bracket ({lo}, {hi})")
    if not float(correlation(lo)) > threshold:
        raise BadBracket(f"correlation at {lo} is already below {threshold}")
    if float(correlation(hi)) > threshold:
        raise Unbounded(f"correlation stays above {threshold} up to {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(correlation(mid)) > threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
