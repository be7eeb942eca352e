"""Unbiased estimate of the expected population-percentile squared error.

For fixed ``(beta, tau)`` the order-H estimate is

    1/12 - sqrt(2/pi)/K * sum_k sum_{h<H} c_h sum_{j<=h} b_{hj} tau^(2h-2j+1) R_k^(2h-2j+1)
         + 1/K * sum_k (R_k - 1/2)^2

with ``c_h = (-1)^h / (2^h h! (2h+1))``, ``b_{hj} = (2h+1)! / (2^j (2h+1-2j)! j!)``
and ``R_k^(m)`` the m-th derivative of the PEPP with respect to ``Y_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import InputError
from .loss import population_percentile, ppsel
from .model import Dataset, WorkingParams, pepp, ranking_shrink
from .special import normal_cdf, normal_pdf

MAX_ORDER = 8
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class RiskConfig:
    order_h: int = 1

    def __post_init__(self):
        if not (isinstance(self.order_h, (int, np.integer)) and 1 <= self.order_h <= MAX_ORDER):
            raise InputError(f"order_h must be an integer in [1, {MAX_ORDER}], got {self.order_h!r}")


@dataclass(frozen=True)
class RiskValue:
    qhat: float
    per_unit_terms: np.ndarray


@lru_cache(maxsize=None)
def series_coefficients(order_h: int) -> tuple:
    """((m, power_of_tau, coefficient), ...) for the truncated double sum.

    Coefficients are exact rationals converted once to float.
    """
    out = []
    for h in range(order_h):
        c_h = Fraction((-1) ** h, 2 ** h * math.factorial(h) * (2 * h + 1))
        for j in range(h + 1):
            b = Fraction(math.factorial(2 * h + 1),
                         2 ** j * math.factorial(2 * h + 1 - 2 * j) * math.factorial(j))
            m = 2 * h - 2 * j + 1
            out.append((m, m, float(c_h * b)))
    return tuple(out)


def _derivative_stack(u, V, m_max: int):
    """Array of d^m/dY^m Phi(V u) for m = 1..m_max, stacked on axis 0."""
    z = V * u
    phi = normal_pdf(z)
    he_prev = np.ones_like(z)  # He_0
    he_cur = z                 # He_1
    out = []
    Vm = np.ones_like(z) * V
    for m in range(1, m_max + 1):
        if m == 1:
            he = he_prev
        elif m == 2:
            he = he_cur
        else:
            he_prev, he_cur = he_cur, z * he_cur - (m - 2) * he_prev
            he = he_cur
        sign = 1.0 if m % 2 == 1 else -1.0
        out.append(sign * Vm * he * phi)
        Vm = Vm * V
    return np.stack(out)


def pepp_derivative(unit, params: WorkingParams, m: int):
    """m-th derivative of the PEPP with respect to Y_k (unit or dataset)."""
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise InputError(f"derivative order must be a positive integer, got {m!r}")
    if isinstance(unit, Dataset):
        u = unit.y - unit.X @ params.beta
    else:
        x = np.asarray(unit.x, dtype=float)
        if x.shape[0] != params.beta.shape[0]:
            raise InputError("covariate length does not match beta")
        u = np.asarray(unit.y - x @ params.beta, dtype=float)
    V = np.asarray(ranking_shrink(unit.sigma, params.tau), dtype=float)
    out = _derivative_stack(np.asarray(u, dtype=float), V, m)[m - 1]
    return float(out) if np.ndim(out) == 0 else out


def qhat_terms(u, V, tau: float, order_h: int = 1):
    """Per-unit contributions (everything except the leading 1/12).

    ``u`` and ``V`` broadcast, so this also evaluates many replicates at once.
    """
    u = np.asarray(u, dtype=float)
    V = np.asarray(V, dtype=float)
    coefs = series_coefficients(order_h)
    derivs = _derivative_stack(u, V, 2 * order_h - 1)
    series = np.zeros(np.broadcast(u, V).shape)
    for m, power, c in coefs:
        series = series + c * tau ** power * derivs[m - 1]
    D = normal_cdf(V * u) - 0.5
    return -SQRT_2_OVER_PI * series + D * D


def qhat_terms_du(u, V, tau: float, order_h: int = 1):
    """d/du of :func:`qhat_terms`."""
    coefs = series_coefficients(order_h)
    derivs = _derivative_stack(np.asarray(u, float), np.asarray(V, float), 2 * order_h)
    series = 0.0
    for m, power, c in coefs:
        series = series + c * tau ** power * derivs[m]
    D = normal_cdf(V * u) - 0.5
    return -SQRT_2_OVER_PI * series + 2.0 * D * derivs[0]


def _prepare(dataset: Dataset, beta, tau):
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape[0] != dataset.p:
        raise InputError(f"beta has length {beta.shape[0]}, design has {dataset.p} columns")
    if not (np.isfinite(tau) and tau > 0):
        raise InputError(f"tau must be > 0, got {tau}")
    return dataset.y - dataset.X @ beta, ranking_shrink(dataset.sigma, tau)


def qhat(dataset: Dataset, beta, tau: float, config: RiskConfig = RiskConfig()) -> RiskValue:
    """Order-H unbiased risk estimate with its per-unit decomposition."""
    u, V = _prepare(dataset, beta, tau)
    terms = qhat_terms(u, V, tau, config.order_h)
    return RiskValue(1.0 / 12.0 + float(np.sum(terms)) / dataset.K, terms)


def qhat_grad(dataset: Dataset, beta, tau: float, order_h: int = 1) -> np.ndarray:
    u, V = _prepare(dataset, beta, tau)
    return -(dataset.X.T @ qhat_terms_du(u, V, tau, order_h)) / dataset.K


def qhat1(dataset: Dataset, beta, tau: float) -> float:
    """Closed-form first-order risk estimate."""
    u, V = _prepare(dataset, beta, tau)
    z = V * u
    D = normal_cdf(z) - 0.5
    K = dataset.K
    return (1.0 / 12.0
            - tau / K * SQRT_2_OVER_PI * float(np.sum(V * normal_pdf(z)))
            + float(np.sum(D * D)) / K)


def qhat1_grad(dataset: Dataset, beta, tau: float) -> np.ndarray:
    u, V = _prepare(dataset, beta, tau)
    z = V * u
    phi = normal_pdf(z)
    D = normal_cdf(z) - 0.5
    # d/du of -tau sqrt(2/pi) V phi(Vu) + D^2
    dterm = tau * SQRT_2_OVER_PI * V * V * z * phi + 2.0 * D * V * phi
    return -(dataset.X.T @ dterm) / dataset.K


def mc_true_risk(draw, beta, tau: float, reps: int, rng=None):
    """Monte Carlo estimate of the expected PPSEL of the PEPP at fixed (beta, tau).

    ``draw(rng)`` returns ``(Dataset, LatentTruth)`` for one replicate of the
    true data-generating model. Returns ``(mean, standard_error)``.
    """
    if reps < 100:
        raise InputError("reps must be >= 100")
    rng = np.random.default_rng(rng)
    params = WorkingParams(beta, tau)
    losses = np.empty(reps)
    for i in range(reps):
        data, truth = draw(rng)
        losses[i] = ppsel(population_percentile(truth.v, tau), pepp(data, params))
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(reps))


__all__ = [
    "MAX_ORDER", "RiskConfig", "RiskValue", "mc_true_risk", "pepp_derivative",
    "qhat", "qhat1", "qhat1_grad", "qhat_grad", "qhat_terms", "series_coefficients",
]
