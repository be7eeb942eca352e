"""End-to-end fit: tau, MLE and RFURE coefficients, and the four percentile sets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import RopperError, StageError
from .loss import (LatentTruth, PercentileKind, PercentileVector, empirical_percentiles,
                   population_percentile, ppsel, proper_percentiles, psel)
from .mm import MMConfig, MMTrace, minimize_qhat, minimize_qhat_order
from .model import Dataset, WorkingParams, mle_beta, pepp, ranking_shrink, shrinkage_factor
from .risk import RiskConfig, qhat
from .variance import TauEstimate, nn_tau_estimate, reml_estimate

METHODS = ("ropper", "pepp_mle", "blup_perc", "residual_perc")
DEGENERATE_TAU2 = 1e-10


@dataclass
class FitOptions:
    tau_method: str = "reml"
    risk_order: int = 1
    mm: MMConfig = field(default_factory=MMConfig)
    nn_seed: int = 0
    standardize: bool = False
    reml_bounds: Optional[tuple] = None

    def __post_init__(self):
        if self.tau_method not in ("reml", "nn"):
            raise ValueError(f"tau_method must be 'reml' or 'nn', got {self.tau_method!r}")
        RiskConfig(self.risk_order)


@dataclass
class FitResult:
    tau: TauEstimate
    beta_mle: np.ndarray
    beta_rfure: np.ndarray
    percentiles: dict  # method -> {"raw": PercentileVector | None, "proper": PercentileVector}
    mm_trace: MMTrace
    diagnostics: dict
    degenerate: bool = False
    qhat_mle: float = float("nan")
    qhat_rfure: float = float("nan")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except RopperError as exc:
        raise StageError(name, exc) from exc
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _estimate_tau(dataset: Dataset, opts: FitOptions) -> TauEstimate:
    if opts.tau_method == "reml":
        return reml_estimate(dataset, opts.reml_bounds)
    return nn_tau_estimate(dataset, opts.nn_seed, opts.standardize, opts.reml_bounds)


def fit(dataset: Dataset, options: FitOptions = None) -> FitResult:
    """ROPPER and the three MLE-based baselines, all at one shared tau estimate."""
    opts = options or FitOptions()
    tau_est = _stage("tau", _estimate_tau, dataset, opts)
    degenerate = tau_est.tau2 < DEGENERATE_TAU2
    tau = math.sqrt(max(tau_est.tau2, DEGENERATE_TAU2))
    if degenerate:
        warnings.warn(f"tau^2 estimate {tau_est.tau2:.3g} is degenerate; PEPP values collapse to 1/2",
                      RuntimeWarning, stacklevel=2)

    beta_mle = _stage("mle", mle_beta, dataset, tau)
    if degenerate:
        beta_r = beta_mle.copy()
        trace = MMTrace(iterates=[(beta_mle.copy(), float("nan"))], converged=True, reason="degenerate")
    else:
        beta_r, trace = _stage("rfure", minimize_qhat, dataset, tau, opts.mm)
        if opts.risk_order > 1:
            beta_r, _ = _stage("rfure", minimize_qhat_order, dataset, tau, opts.risk_order, beta_r)

    resid = dataset.y - dataset.X @ beta_mle
    B = shrinkage_factor(dataset.sigma, tau)
    if degenerate:
        r_ropper = np.full(dataset.K, 0.5)
        r_mle = np.full(dataset.K, 0.5)
    else:
        r_ropper = np.asarray(pepp(dataset, WorkingParams(beta_r, tau)), dtype=float)
        r_mle = np.asarray(pepp(dataset, WorkingParams(beta_mle, tau)), dtype=float)
    blup = B * resid

    percs = {
        "ropper": {"raw": PercentileVector(r_ropper, PercentileKind.RAW),
                   "proper": proper_percentiles(r_ropper)},
        "pepp_mle": {"raw": PercentileVector(r_mle, PercentileKind.RAW),
                     "proper": proper_percentiles(r_mle)},
        "blup_perc": {"raw": None, "proper": proper_percentiles(blup)},
        "residual_perc": {"raw": None, "proper": proper_percentiles(resid)},
    }
    diagnostics = {
        "id": list(dataset.ids),
        "y": dataset.y.copy(),
        "sigma": dataset.sigma.copy(),
        "fitted_mle": dataset.X @ beta_mle,
        "fitted_rfure": dataset.X @ beta_r,
        "B": np.asarray(B, dtype=float),
        "V": np.asarray(ranking_shrink(dataset.sigma, tau), dtype=float),
        "R": r_ropper,
    }
    cfg = RiskConfig(opts.risk_order)
    return FitResult(
        tau=tau_est, beta_mle=beta_mle, beta_rfure=np.asarray(beta_r, dtype=float),
        percentiles=percs, mm_trace=trace, diagnostics=diagnostics, degenerate=degenerate,
        qhat_mle=qhat(dataset, beta_mle, tau, cfg).qhat,
        qhat_rfure=qhat(dataset, beta_r, tau, cfg).qhat,
    )


def score(result: FitResult, truth: LatentTruth) -> dict:
    """PSEL and PPSEL for every method against one shared truth.

    ``psel``/``ppsel`` use the raw values where a method has them and the
    proper projection otherwise; ``*_proper`` always use the projection.
    """
    perc = empirical_percentiles(truth.v).values
    rho = population_percentile(truth.v, truth.tau_true)
    out = {}
    for m in METHODS:
        entry = result.percentiles[m]
        proper = entry["proper"].values
        est = entry["raw"].values if entry["raw"] is not None else proper
        out[m] = {
            "psel": psel(perc, est),
            "ppsel": ppsel(rho, est),
            "psel_proper": psel(perc, proper),
            "ppsel_proper": ppsel(rho, proper),
        }
    return out
