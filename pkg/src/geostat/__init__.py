"""Gaussian random-field simulation, likelihood fitting, kriging and scoring."""

from .errors import GeostatError
from .fields import Dataset, Design, Kind, SplitKind, SplitScheme, TrainTestSplit, split
from .inference import Exact, FitResult, OptimizerConfig, Vecchia, fit_mle, log_likelihood, vecchia_log_likelihood
from .predict import Predictions, exact_kriging, forecast_t10, local_kriging
from .score import ScoreReport, leaderboard, mcrmse, rmse
from .simulate import CovarianceModel, generate, parse_model_spec, preset, sample_grf

__version__ = "0.1.0"

__all__ = [
    "GeostatError",
    "Dataset",
    "Design",
    "Kind",
    "SplitKind",
    "SplitScheme",
    "TrainTestSplit",
    "split",
    "Exact",
    "FitResult",
    "OptimizerConfig",
    "Vecchia",
    "fit_mle",
    "log_likelihood",
    "vecchia_log_likelihood",
    "Predictions",
    "exact_kriging",
    "forecast_t10",
    "local_kriging",
    "ScoreReport",
    "leaderboard",
    "mcrmse",
    "rmse",
    "CovarianceModel",
    "generate",
    "parse_model_spec",
    "preset",
    "sample_grf",
]
