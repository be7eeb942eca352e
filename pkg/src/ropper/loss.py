"""Percentiles, rank projections and the squared-error losses used for scoring."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError
from .special import normal_cdf


class PercentileKind(str, Enum):
    RAW = "raw"
    PROPER = "proper"


@dataclass(frozen=True)
class PercentileVector:
    values: np.ndarray
    kind: PercentileKind

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class LatentTruth:
    """Simulated random effects ``v``, fixed means ``mu`` and the true RE scale."""

    v: np.ndarray
    mu: np.ndarray
    tau_true: float

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if v.shape != mu.shape:
            raise InputError("v and mu must have equal length")
        if not self.tau_true > 0:
            raise InputError("tau_true must be > 0")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "mu", mu)

    @property
    def theta(self) -> np.ndarray:
        return self.mu + self.v


def empirical_percentiles(v) -> PercentileVector:
    """perc_k = #{j : v_k >= v_j} / (K + 1). Ties share the larger count."""
    v = np.asarray(v, dtype=float).reshape(-1)
    s = np.sort(v)
    counts = np.searchsorted(s, v, side="right")
    return PercentileVector(counts / (v.size + 1.0), PercentileKind.PROPER)


def population_percentile(v, tau):
    """rho = Phi(v / tau)."""
    if not tau > 0:
        raise InputError(f"tau must be > 0, got {tau}")
    return normal_cdf(np.asarray(v, dtype=float) / tau)


def proper_percentiles(r) -> PercentileVector:
    """rank(r_k) / (K + 1), ties broken by input order.

    This is the permutation of {1/(K+1), ..., K/(K+1)} closest to ``r`` in
    squared error.
    """
    r = np.asarray(r, dtype=float).reshape(-1)
    order = np.argsort(r, kind="stable")
    ranks = np.empty(r.size, dtype=float)
    ranks[order] = np.arange(1, r.size + 1)
    return PercentileVector(ranks / (r.size + 1.0), PercentileKind.PROPER)


def _mse(a, b):
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.size} vs {b.size}")
    d = a - b
    return float(np.mean(d * d))


def psel(truth_percs, estimates) -> float:
    """Percentile squared-error loss, mean over units."""
    return _mse(truth_percs, estimates)


def ppsel(rho, estimates) -> float:
    """Population-percentile squared-error loss, mean over units."""
    return _mse(rho, estimates)
