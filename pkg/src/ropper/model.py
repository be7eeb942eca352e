"""Working-model data types and the closed-form estimator family.

Under the working model ``Y_k = x_k'beta + v_k + e_k`` with ``v_k ~ N(0, tau^2)``
and ``e_k ~ N(0, sigma_k^2)`` the posterior expected population percentile of
unit ``k`` is ``Phi(V_k * (Y_k - x_k'beta))`` where
``V_k = sqrt(B_k / (2 sigma_k^2 + tau^2))`` and ``B_k = tau^2 / (tau^2 + sigma_k^2)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InputError, SingularDesignError
from .special import normal_cdf

COND_WARN = 1e10


@dataclass(frozen=True)
class UnitRecord:
    """One cluster: summary statistic, its known standard error and covariates."""

    id: object
    y: float
    sigma: float
    x: tuple
    n: Optional[int] = None

    def __post_init__(self):
        if not np.isfinite(self.y):
            raise InputError(f"unit {self.id!r}: y must be finite")
        _check_sigma(self.sigma)
        if self.n is not None and int(self.n) < 1:
            raise InputError(f"unit {self.id!r}: n must be a positive integer")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))


@dataclass(frozen=True)
class WorkingParams:
    beta: np.ndarray
    tau: float

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not np.all(np.isfinite(beta)):
            raise InputError("beta must be finite")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise InputError(f"tau must be > 0, got {self.tau}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "tau", float(self.tau))


@dataclass(frozen=True)
class ShrinkageFactors:
    b: float
    v: float


@dataclass(eq=False)
class Dataset:
    """K units stored column-wise.

    ``X`` is used verbatim as the design; no intercept column is inserted.
    """

    y: np.ndarray
    sigma: np.ndarray
    X: np.ndarray
    ids: list = field(default=None)
    n: Optional[np.ndarray] = None
    columns: Optional[list] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        self.X = X
        K = self.y.shape[0]
        if K < 1:
            raise InputError("dataset needs at least one unit")
        if self.sigma.shape[0] != K or X.shape[0] != K:
            raise InputError(
                f"length mismatch: y={K}, sigma={self.sigma.shape[0]}, X rows={X.shape[0]}"
            )
        if not np.all(np.isfinite(self.y)):
            raise InputError("y must be finite")
        if not np.all(np.isfinite(X)):
            raise InputError("covariates must be finite")
        _check_sigma(self.sigma)
        if self.ids is None:
            self.ids = list(range(K))
        if self.n is not None:
            self.n = np.asarray(self.n, dtype=int).reshape(-1)
        if self.columns is None:
            self.columns = [f"x{j + 1}" for j in range(X.shape[1])]

    @property
    def K(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def units(self) -> list:
        n = self.n if self.n is not None else [None] * self.K
        return [
            UnitRecord(i, yk, sk, tuple(xk), None if nk is None else int(nk))
            for i, yk, sk, xk, nk in zip(self.ids, self.y, self.sigma, self.X, n)
        ]

    @classmethod
    def from_units(cls, units: Sequence[UnitRecord]) -> "Dataset":
        units = list(units)
        if not units:
            raise InputError("dataset needs at least one unit")
        p = len(units[0].x)
        for u in units:
            if len(u.x) != p:
                raise InputError(f"unit {u.id!r} has {len(u.x)} covariates, expected {p}")
        n = None
        if all(u.n is not None for u in units):
            n = np.array([u.n for u in units])
        return cls(
            y=np.array([u.y for u in units]),
            sigma=np.array([u.sigma for u in units]),
            X=np.array([u.x for u in units], dtype=float).reshape(len(units), p),
            ids=[u.id for u in units],
            n=n,
        )

    def with_intercept(self) -> "Dataset":
        """Copy with a column of ones prepended to the design."""
        X = np.column_stack([np.ones(self.K), self.X])
        return Dataset(self.y, self.sigma, X, list(self.ids), self.n, ["intercept", *self.columns])


def _check_sigma(sigma):
    s = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(s)):
        raise InputError("sigma must be finite")
    if np.any(s < 0):
        raise InputError("sigma must be >= 0")


def _check_tau(tau):
    if not (np.isfinite(tau) and tau > 0):
        raise InputError(f"tau must be > 0, got {tau}")


def shrinkage_factor(sigma, tau):
    """B = tau^2 / (tau^2 + sigma^2)."""
    _check_sigma(sigma)
    _check_tau(tau)
    s2 = np.asarray(sigma, dtype=float) ** 2
    t2 = tau * tau
    out = t2 / (t2 + s2)
    return float(out) if np.ndim(out) == 0 else out


def ranking_shrink(sigma, tau):
    """V = sqrt(B / (2 sigma^2 + tau^2)); lies in [0, 1/tau]."""
    _check_sigma(sigma)
    _check_tau(tau)
    s2 = np.asarray(sigma, dtype=float) ** 2
    t2 = tau * tau
    out = np.sqrt(t2 / ((t2 + s2) * (2.0 * s2 + t2)))
    return float(out) if np.ndim(out) == 0 else out


def shrinkage_factors(sigma, tau) -> ShrinkageFactors:
    return ShrinkageFactors(shrinkage_factor(sigma, tau), ranking_shrink(sigma, tau))


def _residuals(data, params: WorkingParams):
    if isinstance(data, UnitRecord):
        x = np.asarray(data.x, dtype=float)
        if x.shape[0] != params.beta.shape[0]:
            raise InputError(f"unit has {x.shape[0]} covariates but beta has {params.beta.shape[0]}")
        return float(data.y - x @ params.beta), data.sigma
    if data.p != params.beta.shape[0]:
        raise InputError(f"design has {data.p} columns but beta has {params.beta.shape[0]}")
    return data.y - data.X @ params.beta, data.sigma


def best_predictor(data, params: WorkingParams):
    """B * (y - x'beta) for a UnitRecord (scalar) or a Dataset (array)."""
    r, sigma = _residuals(data, params)
    return shrinkage_factor(sigma, params.tau) * r


def pepp(data, params: WorkingParams):
    """Posterior expected population percentile Phi(V * (y - x'beta))."""
    r, sigma = _residuals(data, params)
    return normal_cdf(ranking_shrink(sigma, params.tau) * r)


def pepp_individual(ybar, xbar, n, sigma2, params: WorkingParams):
    """PEPP when a unit's summary is the mean of ``n`` individual observations.

    ``sigma2`` is the within-unit variance of a single observation; the result
    equals ``pepp`` with ``y = ybar``, ``x = xbar`` and ``sigma^2 = sigma2 / n``.
    """
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n}")
    if not (np.isfinite(sigma2) and sigma2 > 0):
        raise InputError(f"sigma2 must be > 0, got {sigma2}")
    tau = params.tau
    s2n = sigma2 / n
    v_tilde = tau / np.sqrt((tau * tau + s2n) * (2.0 * s2n + tau * tau))
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    if xbar.shape[0] != params.beta.shape[0]:
        raise InputError("xbar length does not match beta")
    return normal_cdf(v_tilde * (ybar - xbar @ params.beta))


def dependent_columns(X: np.ndarray, names=None, rtol: float = 1e-10) -> list:
    """Names of columns that are (numerically) in the span of earlier columns."""
    names = names or [f"x{j + 1}" for j in range(X.shape[1])]
    bad, kept = [], []
    scale = max(np.linalg.norm(X), 1.0)
    for j in range(X.shape[1]):
        trial = X[:, kept + [j]]
        s = np.linalg.svd(trial, compute_uv=False)
        if s[-1] <= rtol * scale:
            bad.append(names[j])
        else:
            kept.append(j)
    return bad


def gls_solve(X: np.ndarray, y: np.ndarray, w: np.ndarray, names=None) -> np.ndarray:
    """Solve min sum_k w_k (y_k - x_k'b)^2 by QR on the sqrt-weighted design."""
    sw = np.sqrt(w)
    A = X * sw[:, None]
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= 1e-13 * max(diag.max(), 1e-300):
        cols = dependent_columns(X, names)
        raise SingularDesignError(
            f"design is rank deficient; dependent columns: {cols}", columns=cols
        )
    cond = np.linalg.cond(r) ** 2
    if cond > COND_WARN:
        warnings.warn(f"ill-conditioned weighted normal equations (cond ~ {cond:.3g})",
                      RuntimeWarning, stacklevel=3)
    return solve_triangular(r, q.T @ (y * sw))


def mle_beta(dataset: Dataset, tau: float) -> np.ndarray:
    """GLS estimate of beta under the working model for fixed ``tau``."""
    _check_tau(tau)
    if dataset.K <= dataset.p:
        raise InputError(f"need K > p (K={dataset.K}, p={dataset.p})")
    w = 1.0 / (tau * tau + dataset.sigma ** 2)
    return gls_solve(dataset.X, dataset.y, w, dataset.columns)
