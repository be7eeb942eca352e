"""Percentile ranking of small-area units by minimizing an unbiased risk estimate."""

__version__ = "0.1.0"

from .errors import InputError, RopperError, SingularDesignError, StageError
from .loss import (LatentTruth, PercentileKind, PercentileVector, empirical_percentiles,
                   population_percentile, ppsel, proper_percentiles, psel)
from .mm import MMConfig, MMTrace, minimize_qhat, mm_step
from .model import (Dataset, UnitRecord, WorkingParams, best_predictor, mle_beta, pepp,
                    pepp_individual, ranking_shrink, shrinkage_factor)
from .pipeline import METHODS, FitOptions, FitResult, fit, score
from .risk import RiskConfig, mc_true_risk, pepp_derivative, qhat, qhat1
from .variance import TauEstimate, nn_tau_estimate, reml_estimate

__all__ = [
    "__version__", "Dataset", "FitOptions", "FitResult", "InputError", "LatentTruth", "METHODS",
    "MMConfig", "MMTrace", "PercentileKind", "PercentileVector", "RiskConfig", "RopperError",
    "SingularDesignError", "StageError", "TauEstimate", "UnitRecord", "WorkingParams",
    "best_predictor", "empirical_percentiles", "fit", "mc_true_risk", "minimize_qhat", "mle_beta",
    "mm_step", "nn_tau_estimate", "pepp", "pepp_derivative", "pepp_individual",
    "population_percentile", "ppsel", "proper_percentiles", "psel", "qhat", "qhat1",
    "ranking_shrink", "reml_estimate", "score", "shrinkage_factor",
]
