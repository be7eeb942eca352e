"""Random-effects variance estimators: REML and the split-sample 1-NN estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import InputError, SingularDesignError
from .model import Dataset


@dataclass(frozen=True)
class TauEstimate:
    tau2: float
    method: str  # "reml", "nn" or "nn_fell_back_to_reml"
    objective_value: Optional[float] = None
    at_boundary: bool = False
    raw_nn: Optional[float] = None

    @property
    def tau(self) -> float:
        return math.sqrt(self.tau2)


def reml_objective_grid(dataset: Dataset, taus) -> np.ndarray:
    """REML objective at each tau in ``taus`` (vectorized over the grid)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(~np.isfinite(taus)) or np.any(taus <= 0):
        raise InputError("tau must be > 0")
    X, y = dataset.X, dataset.y
    winv = 1.0 / (taus[:, None] ** 2 + dataset.sigma[None, :] ** 2)   # (G, K)
    XtWX = np.einsum("kj,gk,kl->gjl", X, winv, X)
    XtWy = np.einsum("kj,gk,k->gj", X, winv, y)
    sign, logdet_xwx = np.linalg.slogdet(XtWX)
    if np.any(sign <= 0):
        raise SingularDesignError("X' W^-1 X is singular")
    sol = np.linalg.solve(XtWX, XtWy[..., None])[..., 0]
    quad = np.einsum("gk,k->g", winv, y * y) - np.einsum("gj,gj->g", XtWy, sol)
    logdet_w = -np.sum(np.log(winv), axis=1)
    return logdet_w + logdet_xwx + quad


def reml_objective(dataset: Dataset, tau: float) -> float:
    """log det W + log det(X'W^-1 X) + Y'PY with W = diag(tau^2 + sigma_k^2)."""
    if dataset.K <= dataset.p:
        raise InputError(f"need K > p (K={dataset.K}, p={dataset.p})")
    return float(reml_objective_grid(dataset, [tau])[0])


def reml_projector(dataset: Dataset, tau: float) -> np.ndarray:
    """P = W^-1 - W^-1 X (X'W^-1X)^-1 X'W^-1 as a dense K x K matrix."""
    winv = 1.0 / (tau * tau + dataset.sigma ** 2)
    WX = dataset.X * winv[:, None]
    return np.diag(winv) - WX @ np.linalg.solve(dataset.X.T @ WX, WX.T)


def _default_bounds(dataset: Dataset):
    sd = float(np.std(dataset.y, ddof=1)) if dataset.K > 1 else 1.0
    return 1e-6, 10.0 * max(sd, 1e-6)


def reml_estimate(dataset: Dataset, bounds=None, grid_size: int = 400) -> TauEstimate:
    """Minimize the REML objective over tau in ``bounds``.

    A geometric grid locates the basin; bounded Brent (golden section with
    parabolic steps) polishes it. If the minimum sits on the upper bound the
    bracket is widened tenfold once.
    """
    if dataset.K <= dataset.p:
        raise InputError(f"need K > p (K={dataset.K}, p={dataset.p})")
    lo, hi = bounds if bounds is not None else _default_bounds(dataset)
    if not (0 <= lo < hi):
        raise InputError(f"invalid bounds ({lo}, {hi})")
    lo = max(lo, 1e-12)
    for attempt in range(2):
        grid = np.geomspace(lo, hi, grid_size)
        vals = reml_objective_grid(dataset, grid)
        if not np.any(np.isfinite(vals)):
            raise InputError("REML objective is non-finite across the bracket")
        i = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.nan)))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
        res = optimize.minimize_scalar(
            lambda t: reml_objective_grid(dataset, [t])[0],
            bounds=(a, b), method="bounded", options={"xatol": 1e-12 * max(b, 1.0)},
        )
        tau, fval = (res.x, res.fun) if res.fun <= vals[i] else (grid[i], vals[i])
        on_hi = abs(tau - hi) <= 1e-6 * hi
        if on_hi and attempt == 0 and bounds is None:
            hi *= 10.0
            continue
        break
    at_boundary = abs(tau - hi) <= 1e-6 * hi or abs(tau - lo) <= 1e-6 * max(lo, 1e-6)
    return TauEstimate(float(tau) ** 2, "reml", float(fval), at_boundary)


def nn_split(K: int, rng_seed) -> tuple:
    """Random test/train split; the test set holds ceil(K/2) units."""
    k_test = K // 2 if K % 2 == 0 else (K + 1) // 2
    perm = np.random.default_rng(rng_seed).permutation(K)
    return np.sort(perm[:k_test]), np.sort(perm[k_test:])


def nearest_neighbors(Z: np.ndarray, test: np.ndarray, train: np.ndarray) -> np.ndarray:
    """For each test row, the training index at minimal squared Euclidean distance.

    Ties go to the smallest training index (``train`` is sorted ascending).
    """
    diff = Z[test][:, None, :] - Z[train][None, :, :]
    dist = np.einsum("ijk,ijk->ij", diff, diff)
    return train[np.argmin(dist, axis=1)]


def nn_tau_raw(dataset: Dataset, rng_seed, standardize: bool = False) -> float:
    K = dataset.K
    test, train = nn_split(K, rng_seed)
    Z = dataset.X
    if standardize:
        sd = Z.std(axis=0)
        Z = np.where(sd > 0, (Z - Z.mean(axis=0)) / np.where(sd > 0, sd, 1.0), 0.0)
    nbr = nearest_neighbors(Z, test, train)
    y, s2 = dataset.y, dataset.sigma ** 2
    k_t = test.size
    return float(np.mean(y * y) - np.sum(y[test] * y[nbr]) / k_t - np.sum(s2[test]) / k_t)


def nn_tau_estimate(dataset: Dataset, rng_seed, standardize: bool = False,
                    reml_bounds=None) -> TauEstimate:
    """Sigma-adjusted one-nearest-neighbor estimate of tau^2, REML if negative."""
    if dataset.K < 4:
        raise InputError(f"nearest-neighbor estimator needs K >= 4, got {dataset.K}")
    raw = nn_tau_raw(dataset, rng_seed, standardize)
    if raw < 0:
        reml = reml_estimate(dataset, reml_bounds)
        return TauEstimate(reml.tau2, "nn_fell_back_to_reml", reml.objective_value,
                           reml.at_boundary, raw_nn=raw)
    return TauEstimate(raw, "nn", None, False, raw_nn=raw)
