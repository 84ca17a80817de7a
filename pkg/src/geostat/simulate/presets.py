"""Published competition configurations, reproducible at any size."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .. import kernels as K
from ..errors import DomainError, UnknownPreset
from ..fields import (
    Dataset,
    Design,
    Kind,
    SplitKind,
    make_bivariate_design,
    make_grid,
    make_spacetime_design,
    sample_uniform_locations,
)
from .models import BivariateMatern, CovarianceModel, Gneiting, MeanPlusNugget, NonstatMatern
from .sampler import DENSE_CAP, sample_grf


@dataclass(frozen=True)
class DesignRecipe:
    """``n`` counts spatial locations; space-time designs repeat them over ``m_slots``."""

    layout: str  # "grid" or "uniform"
    n: int
    scheme: SplitKind
    kind: Kind = Kind.SPATIAL
    m_slots: int | None = None

    @property
    def rows(self) -> int:
        if self.kind is Kind.SPACETIME:
            return self.n * self.m_slots
        if self.kind is Kind.BIVARIATE:
            return 2 * self.n
        return self.grid_side ** 2 if self.layout == "grid" else self.n

    @property
    def grid_side(self) -> int:
        return max(2, round(math.sqrt(self.n)))

    def build(self, seed: int) -> Design:
        if self.layout == "grid":
            pts = make_grid(self.grid_side)
        else:
            pts = sample_uniform_locations(self.n, seed)
        if self.kind is Kind.SPACETIME:
            return make_spacetime_design(pts, self.m_slots)
        if self.kind is Kind.BIVARIATE:
            return make_bivariate_design(pts)
        return Design(Kind.SPATIAL, pts)


@dataclass(frozen=True)
class Preset:
    name: str
    model: CovarianceModel
    recipe: DesignRecipe


def _nonstat():
    return NonstatMatern(
        K.NonstatMaternModel(K.COMPETITION_SITES, bandwidth=0.09, rotation=math.pi / 2, smoothness=0.7, nugget=0.3)
    )


def _gneiting(range_space, range_time, alpha):
    return Gneiting(K.GneitingParams(0.9, range_space, range_time, alpha, 0.9, 1.0))


def _bivariate(flavor, nu1, nu2, a1, a2):
    return BivariateMatern(K.BivariateMaternParams(flavor, 0.9, 0.9, 0.9, nu1, nu2, a1, a2, 0.0))


def _table():
    out = {
        "1a-1": Preset("1a-1", MeanPlusNugget(K.MeanSurface.MEAN1A, 0.1), DesignRecipe("grid", 100_000, SplitKind.RANDOM10)),
        "1b-1": Preset("1b-1", MeanPlusNugget(K.MeanSurface.MEAN1B, 0.3), DesignRecipe("grid", 1_000_000, SplitKind.RANDOM10)),
        "1a-2": Preset("1a-2", _nonstat(), DesignRecipe("uniform", 100_000, SplitKind.RANDOM10)),
        "1b-2": Preset("1b-2", _nonstat(), DesignRecipe("uniform", 1_000_000, SplitKind.RANDOM10)),
    }
    settings = [(0.02, 1.0, 0.6), (0.08, 0.24, 0.6), (0.4, 1.0, 0.08)]
    schemes = [SplitKind.RS, SplitKind.RST, SplitKind.T10]
    k = 1
    for n in (1_000, 10_000):
        for scheme in schemes:
            for a_s, a_t, alpha in settings:
                name = f"ST{k}"
                out[name] = Preset(
                    name, _gneiting(a_s, a_t, alpha), DesignRecipe("uniform", n, scheme, Kind.SPACETIME, 100)
                )
                k += 1
    P, F = K.BivariateFlavor.PARSIMONIOUS, K.BivariateFlavor.FLEXIBLE
    for size, n in (("a", 25_000), ("b", 250_000)):
        rows = {
            f"3{size}-1": _bivariate(P, 0.6, 1.4, 0.03, 0.03),
            f"3{size}-2": _bivariate(F, 0.9, 0.9, 0.02, 0.3),
            f"3{size}-3": _bivariate(F, 0.6, 1.4, 0.03, 0.1),
        }
        for name, model in rows.items():
            out[name] = Preset(name, model, DesignRecipe("uniform", n, SplitKind.RANDOM10, Kind.BIVARIATE))
    return out


PRESETS: dict[str, Preset] = _table()


def preset(name: str, n: int | None = None, m_slots: int | None = None) -> Preset:
    """Look up a published configuration; ``n``/``m_slots`` shrink the design only."""
    key = name.strip()
    match = next((k for k in PRESETS if k.lower() == key.lower()), None)
    if match is None:
        raise UnknownPreset(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    p = PRESETS[match]
    recipe = p.recipe
    if n is not None:
        if n < 1:
            raise DomainError("n must be positive")
        recipe = replace(recipe, n=int(n))
    if m_slots is not None:
        if recipe.kind is not Kind.SPACETIME:
            raise DomainError(f"preset {match} is not space-time; --m-slots does not apply")
        recipe = replace(recipe, m_slots=int(m_slots))
    return replace(p, recipe=recipe)


def generate(
    name: str,
    seed: int = 0,
    n: int | None = None,
    m_slots: int | None = None,
    dense_cap: int = DENSE_CAP,
    threads: int | None = None,
) -> Dataset:
    p = preset(name, n, m_slots)
    design = p.recipe.build(seed)
    meta = {
        "preset": p.name,
        "n": p.recipe.n,
        "layout": p.recipe.layout,
        "scheme": p.recipe.scheme.value,
    }
    if p.recipe.m_slots is not None:
        meta["m_slots"] = p.recipe.m_slots
    return sample_grf(p.model, design, seed, dense_cap=dense_cap, threads=threads, metadata=meta)
