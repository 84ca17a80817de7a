"""Datasets, location designs and the train/test missingness schemes."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .errors import DimensionMismatch, DomainError, IncompatibleScheme

SEED_MASK = (1 << 64) - 1
UNIT_TOL = 1e-12


class Kind(str, Enum):
    SPATIAL = "spatial"
    SPACETIME = "spacetime"
    BIVARIATE = "bivariate"


def rng_stream(seed: int, purpose: str) -> np.random.Generator:
    """Philox stream keyed by ``(seed, hash(purpose))``.

    Different purposes (location sampling, splitting, field noise, ...) never
    share a stream, and the same pair always reproduces the same draws.
    """
    tag = int.from_bytes(hashlib.blake2b(purpose.encode(), digest_size=8).digest(), "little")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & SEED_MASK, tag])))


def _readonly(a):
    if a is not None:
        a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Design:
    """Observation sites: spatial points, space-time points, or variable-tagged points."""

    kind: Kind
    coords: np.ndarray
    t: np.ndarray | None = None
    var: np.ndarray | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        coords = np.array(self.coords, dtype=np.float64, copy=True).reshape(-1, 2)
        n = coords.shape[0]
        if not np.all(np.isfinite(coords)):
            raise DomainError("non-finite coordinates")
        if np.any(coords < -UNIT_TOL) or np.any(coords > 1 + UNIT_TOL):
            raise DomainError("coordinates must lie in the unit square")
        t = var = None
        if kind is Kind.SPACETIME:
            if self.t is None:
                raise DimensionMismatch("space-time design needs a time column")
            t = np.array(self.t, dtype=np.float64, copy=True).reshape(-1)
            if t.shape[0] != n:
                raise DimensionMismatch("time column length differs from coordinates")
            if not np.all(np.isfinite(t)) or np.any(t < 0):
                raise DomainError("times must be finite and non-negative")
        elif kind is Kind.BIVARIATE:
            if self.var is None:
                raise DimensionMismatch("bivariate design needs a variable column")
            var = np.array(self.var, dtype=np.int64, copy=True).reshape(-1)
            if var.shape[0] != n:
                raise DimensionMismatch("variable column length differs from coordinates")
            if np.any((var != 1) & (var != 2)):
                raise DomainError("variable index must be 1 or 2")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "coords", _readonly(coords))
        object.__setattr__(self, "t", _readonly(t))
        object.__setattr__(self, "var", _readonly(var))

    def __len__(self) -> int:
        return self.coords.shape[0]

    def take(self, idx) -> "Design":
        idx = np.asarray(idx, dtype=np.int64)
        return Design(
            self.kind,
            self.coords[idx],
            None if self.t is None else self.t[idx],
            None if self.var is None else self.var[idx],
        )

    def features(self, rescale=None) -> np.ndarray:
        """Coordinates used for neighbor search: ``(x, y)`` or ``(x, y, t)``, optionally rescaled."""
        cols = [self.coords]
        if self.kind is Kind.SPACETIME:
            cols.append(self.t[:, None])
        f = np.hstack(cols)
        if rescale is not None:
            f = f * np.asarray(rescale, dtype=np.float64)
        return f


@dataclass(frozen=True, eq=False)
class Dataset:
    design: Design
    values: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        z = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if z.shape[0] != len(self.design):
            raise DimensionMismatch(f"{z.shape[0]} values for {len(self.design)} sites")
        if not np.all(np.isfinite(z)):
            raise DomainError("values must be finite")
        object.__setattr__(self, "values", _readonly(z))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def kind(self) -> Kind:
        return self.design.kind

    def __len__(self) -> int:
        return len(self.design)

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.design.take(idx), self.values[idx], self.metadata)


# -- location designs -----------------------------------------------------------


def make_grid(k: int) -> np.ndarray:
    """``k*k`` cell centres of a regular grid, x varying fastest."""
    if k < 2:
        raise DomainError("grid needs at least 2 points per side")
    c = (np.arange(k) + 0.5) / k
    xx, yy = np.meshgrid(c, c, indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def sample_uniform_locations(n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise DomainError("need at least one location")
    rng = rng_stream(seed, "locations")
    pts = rng.random((n, 2))
    while True:
        _, first = np.unique(pts, axis=0, return_index=True)
        if first.size == n:
            return pts
        dup = np.setdiff1d(np.arange(n), first)
        pts[dup] = rng.random((dup.size, 2))


def make_spacetime_design(spatial, m: int = 100) -> Design:
    """Cross product of locations and time slots ``0..m-1``, time-major."""
    if m < 1:
        raise DomainError("need at least one time slot")
    spatial = np.asarray(spatial, dtype=np.float64).reshape(-1, 2)
    ns = spatial.shape[0]
    coords = np.tile(spatial, (m, 1))
    t = np.repeat(np.arange(m, dtype=np.float64), ns)
    return Design(Kind.SPACETIME, coords, t=t)


def make_bivariate_design(spatial) -> Design:
    """Two rows per location (variable 1 then variable 2), location-major."""
    spatial = np.asarray(spatial, dtype=np.float64).reshape(-1, 2)
    coords = np.repeat(spatial, 2, axis=0)
    var = np.tile([1, 2], spatial.shape[0])
    return Design(Kind.BIVARIATE, coords, var=var)


# -- splitting -------------------------------------------------------------------


class SplitKind(str, Enum):
    RANDOM10 = "random10"
    RS = "rs"
    RST = "rst"
    T10 = "t10"


_COMPATIBLE = {
    SplitKind.RANDOM10: {Kind.SPATIAL, Kind.BIVARIATE},
    SplitKind.RS: {Kind.SPACETIME},
    SplitKind.RST: {Kind.SPACETIME},
    SplitKind.T10: {Kind.SPACETIME},
}


@dataclass(frozen=True)
class SplitScheme:
    kind: SplitKind
    test_fraction: float = 0.1

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, SplitKind) else SplitKind(str(self.kind).lower())
        object.__setattr__(self, "kind", kind)
        if not 0 < self.test_fraction < 1:
            raise DomainError("test fraction must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class TrainTestSplit:
    train: Dataset
    test: Dataset
    test_indices: np.ndarray
    train_indices: np.ndarray


def holdout_size(fraction: float, count: int) -> int:
    """``round(fraction * count)`` with halves rounded up, kept inside ``[1, count - 1]``."""
    if count < 2:
        raise IncompatibleScheme("need at least two units to split")
    k = math.floor(fraction * count + 0.5)
    return min(max(k, 1), count - 1)


def _location_groups(coords: np.ndarray) -> np.ndarray:
    _, inverse = np.unique(coords, axis=0, return_inverse=True)
    return inverse.reshape(-1)


def split(d: Dataset, scheme: SplitScheme, seed: int) -> TrainTestSplit:
    if d.kind not in _COMPATIBLE[scheme.kind]:
        raise IncompatibleScheme(f"scheme {scheme.kind.value} does not apply to {d.kind.value} data")
    n = len(d)
    rng = rng_stream(seed, f"split:{scheme.kind.value}")
    is_test = np.zeros(n, dtype=bool)
    if scheme.kind is SplitKind.T10:
        slots = np.unique(d.design.t)
        if slots.size < 11:
            raise IncompatibleScheme("T10 needs at least 11 time slots")
        is_test = d.design.t >= slots[-10]
    elif scheme.kind is SplitKind.RST or (scheme.kind is SplitKind.RANDOM10 and d.kind is Kind.SPATIAL):
        k = holdout_size(scheme.test_fraction, n)
        is_test[rng.choice(n, size=k, replace=False)] = True
    else:
        # whole locations: RS over space-time rows, Random10 over bivariate pairs
        groups = _location_groups(d.design.coords)
        n_loc = int(groups.max()) + 1
        k = holdout_size(scheme.test_fraction, n_loc)
        chosen = np.zeros(n_loc, dtype=bool)
        chosen[rng.choice(n_loc, size=k, replace=False)] = True
        is_test = chosen[groups]
    test_idx = np.flatnonzero(is_test)
    train_idx = np.flatnonzero(~is_test)
    return TrainTestSplit(d.take(train_idx), d.take(test_idx), test_idx, train_idx)
