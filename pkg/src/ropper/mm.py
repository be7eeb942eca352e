"""Majorize-minimize solver for the first-order risk estimate.

Minimizing ``qhat1`` is the same as maximizing ``sum_k (f_k + g_k)`` with
``f_k = tau sqrt(2/pi) V_k phi(V_k u_k)`` and ``g_k = 1 - D(V_k u_k)^2``.
Each iteration majorizes ``-log sum_k h_k`` by a weighted sum of ``-log f_k``
(an exact quadratic) and ``-log g_k`` (bounded above by a quadratic with
curvature 1/3, since ``d'(u) <= 1/3``), and minimizes the bound by a weighted
least-squares solve.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from .errors import InputError, SingularDesignError
from .model import COND_WARN, Dataset, mle_beta, ranking_shrink
from .risk import qhat, qhat1, qhat_grad, RiskConfig
from .special import normal_cdf, normal_pdf

# Upper bound on d'(u); the majorizer is only valid with this exact constant.
CURVATURE = 1.0 / 3.0


@dataclass
class MMConfig:
    max_iter: int = 500
    tol_beta: float = 1e-9
    tol_q: float = 1e-12
    init: object = "mle"  # "mle", "zeros", or a coefficient vector
    multistart: int = 0
    multistart_scale: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if not (self.tol_beta > 0 and self.tol_q > 0):
            raise InputError("tolerances must be > 0")
        if isinstance(self.init, str) and self.init not in ("mle", "zeros"):
            raise InputError(f"unknown init {self.init!r}")
        if self.multistart < 0:
            raise InputError("multistart must be >= 0")


@dataclass
class MMTrace:
    iterates: list = field(default_factory=list)  # (beta, qhat1) pairs
    converged: bool = False
    reason: str = "max_iter"

    @property
    def objective(self) -> np.ndarray:
        return np.array([q for _, q in self.iterates])

    @property
    def n_iter(self) -> int:
        return max(len(self.iterates) - 1, 0)


def d_fun(u):
    """D(u) = Phi(u) - 1/2."""
    return normal_cdf(u) - 0.5


def d_small(u):
    """d(u) = 2 phi(u) D(u) / (1 - D(u)^2), the derivative of -log(1 - D^2) up to sign."""
    D = d_fun(u)
    return 2.0 * normal_pdf(u) * D / (1.0 - D * D)


def d_prime(u):
    """Derivative of :func:`d_small`."""
    u = np.asarray(u, dtype=float)
    D = d_fun(u)
    phi = normal_pdf(u)
    g = 1.0 - D * D
    out = 2.0 * phi * (phi * (1.0 + D * D) / (g * g) - u * D / g)
    return float(out) if out.ndim == 0 else out


def mm_weights(dataset: Dataset, beta_t, tau: float):
    """Normalized weights (w1, w2) and the vector d at the current iterate."""
    V = ranking_shrink(dataset.sigma, tau)
    z = V * (dataset.y - dataset.X @ np.asarray(beta_t, dtype=float))
    D = d_fun(z)
    phi = normal_pdf(z)
    one_minus = 1.0 - D * D
    w1 = V * phi
    w2 = math.sqrt(math.pi) / (tau * math.sqrt(2.0)) * one_minus
    total = float(np.sum(w1) + np.sum(w2))
    assert total > 0.0, "weights vanish; impossible since 1 - D^2 >= 3/4"
    c_t = 1.0 / total
    d = 2.0 * phi * D / one_minus
    return c_t * w1, c_t * w2, d


def _solve_spd(A, b):
    try:
        c = linalg.cho_factor(A, lower=False, check_finite=True)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(A)
        raise SingularDesignError(
            f"MM system is not positive definite (cond ~ {cond:.3g})", condition=cond
        ) from exc
    diag = np.abs(np.diag(c[0]))
    cond_est = (diag.max() / diag.min()) ** 2 if diag.min() > 0 else np.inf
    if not np.isfinite(cond_est):
        raise SingularDesignError("MM system is singular", condition=cond_est)
    if cond_est > COND_WARN:
        warnings.warn(f"ill-conditioned MM system (cond ~ {cond_est:.3g})",
                      RuntimeWarning, stacklevel=3)
    return linalg.cho_solve(c, b)


def mm_step(dataset: Dataset, beta_t, tau: float, weights=None) -> np.ndarray:
    """One MM update of the coefficient vector.

    ``weights`` may carry precomputed ``(w1, w2, d)``; any common positive
    rescaling of ``w1`` and ``w2`` leaves the update unchanged.
    """
    beta_t = np.asarray(beta_t, dtype=float)
    w1, w2, d = weights if weights is not None else mm_weights(dataset, beta_t, tau)
    V = ranking_shrink(dataset.sigma, tau)
    VX = dataset.X * V[:, None]
    A = VX.T @ (VX * (w1 + CURVATURE * w2)[:, None])
    rhs = VX.T @ (w1 * V * dataset.y + w2 * (d + CURVATURE * (VX @ beta_t)))
    return _solve_spd(A, rhs)


def _initial_beta(dataset: Dataset, tau: float, init) -> np.ndarray:
    if isinstance(init, str):
        if init == "mle":
            return mle_beta(dataset, tau)
        return np.zeros(dataset.p)
    beta0 = np.atleast_1d(np.asarray(init, dtype=float))
    if beta0.shape != (dataset.p,):
        raise InputError(f"custom init must have length {dataset.p}")
    return beta0


def _run_mm(dataset: Dataset, tau: float, beta0, config: MMConfig):
    beta = np.array(beta0, dtype=float)
    q = qhat1(dataset, beta, tau)
    trace = MMTrace(iterates=[(beta.copy(), q)])
    for _ in range(config.max_iter):
        new = mm_step(dataset, beta, tau)
        q_new = qhat1(dataset, new, tau)
        step = float(np.max(np.abs(new - beta)))
        dq = q - q_new
        beta, q = new, q_new
        trace.iterates.append((beta.copy(), q))
        if step < config.tol_beta:
            trace.converged, trace.reason = True, "beta_tol"
            break
        if dq < config.tol_q:
            trace.converged, trace.reason = True, "q_tol"
            break
    return beta, trace


def minimize_qhat(dataset: Dataset, tau: float, config: MMConfig = None):
    """RFURE coefficients: minimize ``qhat1`` over beta by MM.

    Returns ``(beta, trace)``. With ``config.multistart > 0`` additional runs
    start from random perturbations of the initial point and the run with the
    smallest final objective wins.
    """
    config = config or MMConfig()
    if dataset.K <= dataset.p:
        raise InputError(f"need K > p (K={dataset.K}, p={dataset.p})")
    if not (np.isfinite(tau) and tau > 0):
        raise InputError(f"tau must be > 0, got {tau}")
    beta0 = _initial_beta(dataset, tau, config.init)
    best = _run_mm(dataset, tau, beta0, config)
    if config.multistart:
        rng = np.random.default_rng(config.seed)
        scale = config.multistart_scale * max(tau, 1e-8)
        for _ in range(config.multistart):
            cand = _run_mm(dataset, tau, beta0 + scale * rng.standard_normal(dataset.p), config)
            if cand[1].iterates[-1][1] < best[1].iterates[-1][1]:
                best = cand
    return best


def minimize_qhat_order(dataset: Dataset, tau: float, order_h: int, beta0: Sequence[float]):
    """Minimize the order-H risk estimate by BFGS from ``beta0``.

    MM majorizers exist only for H = 1, so higher orders use a quasi-Newton
    refinement warm-started at the first-order solution. The returned point
    never has a larger objective than ``beta0``.
    """
    cfg = RiskConfig(order_h)
    beta0 = np.asarray(beta0, dtype=float)

    def fun(b):
        return qhat(dataset, b, tau, cfg).qhat

    def jac(b):
        return qhat_grad(dataset, b, tau, order_h)

    res = optimize.minimize(fun, beta0, jac=jac, method="BFGS", options={"gtol": 1e-10})
    if not np.all(np.isfinite(res.x)) or res.fun > fun(beta0):
        return beta0.copy(), res
    return res.x, res
