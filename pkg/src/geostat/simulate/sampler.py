"""Covariance assembly and exact Gaussian random-field simulation."""

from __future__ import annotations

import numpy as np

from .._parallel import map_blocks
from ..errors import DenseCapExceeded
from ..fields import Dataset, Design, rng_stream
from ..linalg import SymmetricMatrix, cholesky
from .models import CovarianceModel, MeanPlusNugget, sites_of

DENSE_CAP = 20_000
ROW_BLOCK = 256


def build_covariance_matrix(
    model: CovarianceModel, design: Design, nugget: bool = True, threads: int | None = None
) -> SymmetricMatrix:
    """Covariance matrix of ``design`` under ``model``; the nugget only touches the diagonal.

    Only the lower triangle is evaluated, in fixed row blocks that may run on
    several threads.
    """
    model.check(design)
    n = len(design)
    out = np.zeros((n, n))

    def fill(r0, r1):
        rows = sites_of(design, np.arange(r0, r1)).expand(1)
        cols = sites_of(design, np.arange(0, r1)).expand(0)
        out[r0:r1, :r1] = model.kernel(rows, cols)

    map_blocks(fill, n, ROW_BLOCK, threads)
    if nugget and model.nugget > 0:
        out[np.diag_indices(n)] += model.nugget
    return SymmetricMatrix.from_lower(out)


def sample_grf(
    model: CovarianceModel,
    design: Design,
    seed: int,
    dense_cap: int = DENSE_CAP,
    threads: int | None = None,
    metadata: dict | None = None,
) -> Dataset:
    """Draw ``Z = m + L e + tau * eta`` where ``L`` factors the nugget-free covariance.

    ``e`` and ``eta`` come from separate seeded streams, so the same seed always
    gives the same field.
    """
    model.check(design)
    n = len(design)
    z = np.array(model.mean(design), dtype=np.float64)
    if not isinstance(model, MeanPlusNugget):
        if n > dense_cap:
            raise DenseCapExceeded(f"{n} rows exceed the dense simulation cap of {dense_cap}")
        F = cholesky(build_covariance_matrix(model, design, nugget=False, threads=threads))
        e = rng_stream(seed, "field").standard_normal(n)
        z += F.L @ e
    if model.nugget > 0:
        z += np.sqrt(model.nugget) * rng_stream(seed, "nugget").standard_normal(n)
    meta = {"model": model.spec(), "seed": int(seed), "kind": design.kind.value}
    meta.update(metadata or {})
    return Dataset(design, z, meta)
