from .models import (
    FAMILIES,
    BivariateMatern,
    CovarianceModel,
    Gneiting,
    MeanPlusNugget,
    NonstatMatern,
    Sites,
    StationaryMatern,
    model_from_params,
    model_to_spec,
    parse_model_spec,
    sites_of,
)
from .presets import PRESETS, DesignRecipe, Preset, generate, preset
from .sampler import DENSE_CAP, build_covariance_matrix, sample_grf

__all__ = [
    "FAMILIES",
    "BivariateMatern",
    "CovarianceModel",
    "Gneiting",
    "MeanPlusNugget",
    "NonstatMatern",
    "Sites",
    "StationaryMatern",
    "model_from_params",
    "model_to_spec",
    "parse_model_spec",
    "sites_of",
    "PRESETS",
    "DesignRecipe",
    "Preset",
    "generate",
    "preset",
    "DENSE_CAP",
    "build_covariance_matrix",
    "sample_grf",
]
