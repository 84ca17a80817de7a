"""Dense symmetric positive-definite helpers built on LAPACK."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

JITTER_SCHEDULE = (1e-12, 1e-10, 1e-8, 1e-6)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Dense symmetric matrix; the lower triangle is authoritative.

    The upper triangle is overwritten with the transpose of the lower one on
    construction, so the stored entries are bit-identical to their transpose.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        lower = np.tril(a)
        a = lower + np.tril(a, -1).T
        object.__setattr__(self, "entries", _freeze(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_lower(cls, a: np.ndarray, block: int = 512) -> "SymmetricMatrix":
        """Take ownership of ``a`` and mirror its lower triangle in place (no copy)."""
        n = a.shape[0]
        for i0 in range(0, n, block):
            i1 = min(i0 + block, n)
            blk = a[i0:i1, i0:i1]
            blk[...] = np.tril(blk) + np.tril(blk, -1).T
            a[i0:i1, i1:] = a[i1:, i0:i1].T
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        obj = cls.__new__(cls)
        object.__setattr__(obj, "entries", _freeze(a))
        return obj


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    L: np.ndarray
    jitter_applied: float = 0.0

    @property
    def n(self) -> int:
        return self.L.shape[0]


def _as_array(a) -> np.ndarray:
    if isinstance(a, SymmetricMatrix):
        return a.entries
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def cholesky(a, jitter_schedule=JITTER_SCHEDULE) -> CholeskyFactor:
    """Lower Cholesky factor, escalating a diagonal ridge if plain factoring fails.

    The ridge tried at each step is ``factor * mean(diag(a))`` for ``factor`` in
    ``jitter_schedule``; the first one that succeeds is recorded on the result.
    """
    a = _as_array(a)
    try:
        return CholeskyFactor(_freeze(np.linalg.cholesky(a)), 0.0)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(a)))
    if not scale > 0:
        raise NotPositiveDefinite("non-positive mean diagonal")
    eye = np.eye(a.shape[0])
    for factor in jitter_schedule:
        jitter = factor * scale
        try:
            L = np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        return CholeskyFactor(_freeze(L), jitter)
    raise NotPositiveDefinite(
        f"matrix of order {a.shape[0]} is not positive definite even with jitter "
        f"{jitter_schedule[-1]:g} x mean diagonal"
    )


def solve_lower(F: CholeskyFactor, b) -> np.ndarray:
    """Forward substitution ``L x = b``; ``b`` may be a vector or a matrix of columns."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != F.n:
        raise DimensionMismatch(f"right-hand side has {b.shape[0]} rows, factor has order {F.n}")
    return solve_triangular(F.L, b, lower=True, check_finite=False)


def solve(F: CholeskyFactor, b) -> np.ndarray:
    """Solve ``(L L^T) x = b``."""
    y = solve_lower(F, b)
    return solve_triangular(F.L, y, lower=True, trans="T", check_finite=False)


def log_det(F: CholeskyFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(F.L))))


def quadratic_form(F: CholeskyFactor, z) -> float:
    w = solve_lower(F, z)
    return float(w @ w)
