"""Self-check suites run by ``ropper validate``.

Each suite returns ``{"name", "passed", "details"}``. The descent suite looks
up ``mm.d_prime`` at call time so a patched version is picked up.
"""

from __future__ import annotations

import itertools
import json
import math
import time

import numpy as np

from . import mm
from .loss import proper_percentiles
from .model import Dataset, UnitRecord, WorkingParams, pepp
from .risk import pepp_derivative

SUITES = ("stein_identity", "mm_descent", "rank_projection", "derivatives")


def stein_coefficients(h: int) -> list:
    """``[(order, power_of_tau2, coef)]`` for E{v^(h+1) g(Y)} in terms of E g^(order)."""
    a = h + 1
    return [(a - 2 * j, a - j,
             math.factorial(a) / (2 ** j * math.factorial(a - 2 * j) * math.factorial(j)))
            for j in range(a // 2 + 1)]


def stein_sides(h: int, mu: float, sigma: float, tau: float, beta: float,
                draws: int, rng: np.random.Generator):
    """Monte Carlo of both sides of the Gaussian moment identity with g = PEPP.

    The two sides use independent draws. Returns
    ``(lhs, se_lhs, rhs, se_rhs)``.
    """
    params = WorkingParams([beta], tau)

    def g(y, m):
        data = Dataset(y, np.full(y.size, sigma), np.ones((y.size, 1)))
        return pepp(data, params) if m == 0 else pepp_derivative(data, params, m)

    v = tau * rng.standard_normal(draws)
    y = mu + v + sigma * rng.standard_normal(draws)
    lhs = v ** (h + 1) * np.asarray(g(y, 0))
    y2 = mu + tau * rng.standard_normal(draws) + sigma * rng.standard_normal(draws)
    rhs = np.zeros(draws)
    for order, power, c in stein_coefficients(h):
        rhs = rhs + c * tau ** (2 * power) * np.asarray(g(y2, order))
    se = lambda a: float(a.std(ddof=1) / math.sqrt(a.size))
    return float(lhs.mean()), se(lhs), float(rhs.mean()), se(rhs)


def richardson_derivative(f, x: float, step: float = 1e-2, levels: int = 4) -> float:
    """Central differences refined by Richardson extrapolation."""
    table = []
    hstep = step
    for i in range(levels):
        row = [(f(x + hstep) - f(x - hstep)) / (2 * hstep)]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (4 ** j - 1))
        table.append(row)
        hstep /= 2
    return table[-1][-1]


def brute_force_projection(r) -> np.ndarray:
    """Permutation of {1..K}/(K+1) closest to ``r`` in squared error, by enumeration.

    Among equal-loss permutations the lexicographically first is kept, which
    matches ranking with ties broken by position.
    """
    r = np.asarray(r, dtype=float)
    K = r.size
    grid = np.arange(1, K + 1) / (K + 1.0)
    best, best_loss = None, np.inf
    for perm in itertools.permutations(range(K)):
        cand = grid[list(perm)]
        loss = float(np.sum((cand - r) ** 2))
        if loss < best_loss - 1e-15:
            best, best_loss = cand, loss
    return best


def random_instance(rng: np.random.Generator, K: int, p: int):
    X = np.column_stack([np.ones(K), rng.standard_normal((K, p - 1))]) if p > 1 else np.ones((K, 1))
    sigma = rng.uniform(0.3, 2.0, K)
    beta = rng.standard_normal(p)
    y = X @ beta + rng.standard_normal(K) * rng.uniform(0.5, 1.5) + sigma * rng.standard_normal(K)
    tau = float(rng.uniform(0.3, 2.0))
    return Dataset(y, sigma, X), tau


def check_stein(seed: int = 1, draws: int = 100_000, z_max: float = 4.0) -> dict:
    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    for h in (0, 1, 2):
        lhs, sl, rhs, sr = stein_sides(h, mu=0.4, sigma=0.8, tau=1.1, beta=0.1, draws=draws, rng=rng)
        z = abs(lhs - rhs) / math.hypot(sl, sr)
        ok &= z <= z_max
        rows.append({"h": h, "lhs": lhs, "rhs": rhs, "z": z})
    return {"name": "stein_identity", "passed": bool(ok), "details": rows}


def check_descent(seed: int = 2, instances: int = 200) -> dict:
    grid = np.arange(-10.0, 10.0 + 5e-4, 1e-3)
    dmax = float(np.max(mm.d_prime(grid)))
    d0 = float(mm.d_prime(0.0))
    bound_ok = dmax <= mm.CURVATURE + 1e-9 and abs(d0 - 1.0 / math.pi) <= 1e-12
    rng = np.random.default_rng(seed)
    worst_rise, beats_mle = -np.inf, True
    for i in range(instances):
        K = (10, 50)[i % 2]
        p = (1, 3)[(i // 2) % 2]
        data, tau = random_instance(rng, K, p)
        beta, trace = mm.minimize_qhat(data, tau, mm.MMConfig(max_iter=200))
        q = trace.objective
        worst_rise = max(worst_rise, float(np.max(np.diff(q))) if q.size > 1 else -np.inf)
        beats_mle &= q[-1] <= q[0] + 1e-12
    ok = bool(bound_ok and worst_rise <= 1e-12 and beats_mle)
    return {"name": "mm_descent", "passed": ok,
            "details": {"max_d_prime": dmax, "d_prime_0": d0, "worst_rise": worst_rise,
                        "final_le_mle": bool(beats_mle), "instances": instances}}


def check_rank_projection(seed: int = 3, per_k: int = 50, k_range=(3, 4, 5, 6)) -> dict:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for K in k_range:
        for _ in range(per_k):
            r = rng.uniform(0, 1, K)
            if not np.array_equal(proper_percentiles(r).values, brute_force_projection(r)):
                mismatches += 1
    return {"name": "rank_projection", "passed": mismatches == 0,
            "details": {"mismatches": mismatches, "K": list(k_range), "per_K": per_k}}


def check_derivatives(seed: int = 4, points: int = 50, rel_tol: float = 1e-5) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        tau = float(rng.uniform(0.5, 2.0))
        sigma = float(rng.uniform(0.3, 2.0))
        beta = float(rng.normal())
        y0 = float(beta + rng.normal() * 1.5)
        params = WorkingParams([beta], tau)
        for m in range(1, 6):
            def f(y, m=m):
                unit = UnitRecord("u", y, sigma, [1.0])
                return pepp(unit, params) if m == 1 else pepp_derivative(unit, params, m - 1)
            exact = pepp_derivative(UnitRecord("u", y0, sigma, [1.0]), params, m)
            approx = richardson_derivative(f, y0)
            err = abs(approx - exact) / max(abs(exact), 1e-3)
            worst = max(worst, err)
    return {"name": "derivatives", "passed": worst <= rel_tol,
            "details": {"worst_relative_error": worst, "points": points}}


CHECKS = {
    "stein_identity": check_stein,
    "mm_descent": check_descent,
    "rank_projection": check_rank_projection,
    "derivatives": check_derivatives,
}


def run_all() -> dict:
    report = {"suites": [], "passed": True}
    for name in SUITES:
        t0 = time.perf_counter()
        try:
            res = CHECKS[name]()
        except Exception as exc:  # a crashing suite is a failing suite
            res = {"name": name, "passed": False, "details": {"error": f"{type(exc).__name__}: {exc}"}}
        res["seconds"] = round(time.perf_counter() - t0, 3)
        report["suites"].append(res)
        report["passed"] &= bool(res["passed"])
    return report


def to_json(report: dict) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.bool_):
            return bool(o)
        raise TypeError(type(o))
    return json.dumps(report, indent=2, default=default, allow_nan=True)
