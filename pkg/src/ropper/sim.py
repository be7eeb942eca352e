"""Data generators and the replication engine for the simulation studies.

Every replicate ``r`` of a scenario with master seed ``s`` draws from
independent streams ``SeedSequence(s, spawn_key=(r, stream))``; the mapping is
fixed, so results do not depend on worker count or scheduling order.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .errors import InputError, RopperError
from .loss import LatentTruth
from .mm import MMConfig
from .model import Dataset
from .pipeline import METHODS, FitOptions, fit, score

KINDS = ("latent_subgroup", "nonlinear_four", "emulated_education")
RE_DISTS = ("normal", "t3_scaled", "exponential", "gamma")

STREAM_COVARIATES = 0
STREAM_SIZES = 1
STREAM_RANDOM_EFFECTS = 2
STREAM_NOISE = 3
STREAM_LATENT = 4
STREAM_FIT = 5

DEFAULT_BETA = {
    "latent_subgroup": (1.0, 0.0),
    # beta0..beta5; beta5 multiplies X4
    "nonlinear_four": (-1.0, 1.0, 0.5, 0.0, -0.5, 0.0),
    # intercept, latent confounder, then one coefficient per covariate column
    "emulated_education": (-0.895, 0.0, -0.047, -0.001, 0.000, -0.063, 0.031, -0.073, 0.329, 0.114),
}
DEFAULT_GAMMA = (1.0, 2.0, 0.5, 1.5, -1.0, 0.75, 3.0)
MAX_FAILURE_RATE = 0.01

SYNTHETIC_COLUMNS = ("suburban", "town", "rural", "private", "income",
                     "teacher_grad", "parent1_college", "parent2_college")


@dataclass
class ScenarioConfig:
    kind: str = "latent_subgroup"
    K: Optional[int] = None
    beta: Optional[tuple] = None
    gamma: tuple = DEFAULT_GAMMA
    gamma_scale: float = 1.0
    sigma2: float = 2.0
    n_min: Optional[int] = None
    n_max: Optional[int] = None
    alpha1: float = 0.0
    alpha2: float = 0.0
    re_dist: str = "normal"
    tau2_true: float = 1.0
    replicates: int = 100
    seed: int = 20240101
    covariates: Optional[str] = None
    tau_method: str = "reml"  # "reml", "nn" or "both"
    order_h: int = 1
    standardize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.re_dist not in RE_DISTS:
            raise InputError(f"unknown re_dist {self.re_dist!r}; expected one of {RE_DISTS}")
        if self.K is None:
            self.K = 862 if self.kind == "emulated_education" else 50
        if self.n_min is None:
            self.n_min = 1 if self.kind == "emulated_education" else 5
        if self.n_max is None:
            self.n_max = 20 if self.kind == "emulated_education" else 50
        if self.beta is None:
            self.beta = DEFAULT_BETA[self.kind]
        self.beta = tuple(float(b) for b in self.beta)
        self.gamma = tuple(float(g) for g in self.gamma)
        if self.kind == "latent_subgroup" and len(self.beta) != 2:
            raise InputError("latent_subgroup needs beta = (beta0, beta1)")
        if self.kind == "nonlinear_four":
            if len(self.beta) != 6:
                raise InputError("nonlinear_four needs six coefficients beta0..beta5")
            if len(self.gamma) != 7:
                raise InputError("nonlinear_four needs seven exponents gamma1..gamma7")
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")
        if not self.tau2_true > 0:
            raise InputError("tau2_true must be > 0")
        if not self.sigma2 > 0:
            raise InputError("sigma2 must be > 0")
        if not (1 <= self.n_min <= self.n_max):
            raise InputError("need 1 <= n_min <= n_max")
        if self.tau_method not in ("reml", "nn", "both"):
            raise InputError("tau_method must be reml, nn or both")
        self.seed = int(self.seed)
        self.K = int(self.K)

    @property
    def tau_methods(self) -> tuple:
        return ("reml", "nn") if self.tau_method == "both" else (self.tau_method,)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SimResult:
    config: dict
    summary: list
    replicates: list
    n_failed: int = 0
    failures: list = field(default_factory=list)
    version: str = __version__

    def rows(self, tau_method: str = None, method: str = None) -> list:
        return [r for r in self.replicates
                if (tau_method is None or r["tau_method"] == tau_method)
                and (method is None or r["method"] == method)]

    def losses(self, method: str, key: str = "psel", tau_method: str = None) -> np.ndarray:
        tau_method = tau_method or self.config["tau_method"].replace("both", "reml")
        rows = sorted(self.rows(tau_method, method), key=lambda r: r["replicate"])
        return np.array([r[key] for r in rows])

    def paired_difference(self, m1: str, m2: str, key: str = "psel", tau_method: str = None):
        """Mean and standard error of the per-replicate difference m1 - m2."""
        d = self.losses(m1, key, tau_method) - self.losses(m2, key, tau_method)
        se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else float("nan")
        return float(d.mean()), se

    def mean(self, method: str, key: str = "psel", tau_method: str = None) -> float:
        return float(self.losses(method, key, tau_method).mean())


def replicate_stream(seed: int, replicate: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, stream)))


class Streams:
    """Named, independent generators for one replicate."""

    def __init__(self, seed: int, replicate: int = 0):
        self.seed = int(seed)
        self.replicate = int(replicate)
        self._cache = {}

    def __getitem__(self, stream: int) -> np.random.Generator:
        if stream not in self._cache:
            self._cache[stream] = replicate_stream(self.seed, self.replicate, stream)
        return self._cache[stream]

    def int_seed(self, stream: int) -> int:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.replicate, stream))
        return int(ss.generate_state(1, np.uint64)[0])


def _as_streams(rng) -> Streams:
    if isinstance(rng, Streams):
        return rng
    if rng is None:
        return Streams(0)
    return Streams(int(rng))


def draw_random_effect(dist: str, tau2: float, rng, size=None):
    """Mean-zero random effects with variance exactly ``tau2``.

    Non-normal families are shifted and scaled by their population moments:
    t(3) / sqrt(3); Exp(1) - 1; Gamma(shape=2, rate=sqrt(2)) - sqrt(2).
    """
    if not tau2 > 0:
        raise InputError("tau2 must be > 0")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    tau = math.sqrt(tau2)
    if dist == "normal":
        z = rng.standard_normal(size)
    elif dist == "t3_scaled":
        z = rng.standard_t(3, size) / math.sqrt(3.0)
    elif dist == "exponential":
        z = rng.exponential(1.0, size) - 1.0
    elif dist == "gamma":
        z = rng.gamma(2.0, 1.0 / math.sqrt(2.0), size) - math.sqrt(2.0)
    else:
        raise InputError(f"unknown random-effect distribution {dist!r}")
    return tau * z


def _sizes(cfg: ScenarioConfig, st: Streams) -> np.ndarray:
    return st[STREAM_SIZES].integers(cfg.n_min, cfg.n_max + 1, size=cfg.K)


def _random_effects(cfg: ScenarioConfig, st: Streams, surface: np.ndarray, n: np.ndarray):
    v = draw_random_effect(cfg.re_dist, cfg.tau2_true, st[STREAM_RANDOM_EFFECTS], cfg.K)
    if cfg.alpha1:
        v = v + cfg.alpha1 * (surface - surface.mean())
    if cfg.alpha2:
        v = v + cfg.alpha2 * (n - n.mean())
    return v


def _finish(cfg, st, X_fit, mu, surface, n, columns):
    v = _random_effects(cfg, st, surface, n)
    sigma = np.sqrt(cfg.sigma2 / n)
    e = sigma * st[STREAM_NOISE].standard_normal(cfg.K)
    y = mu + v + e
    data = Dataset(y, sigma, X_fit, n=n, columns=list(columns))
    return data, LatentTruth(v, mu, math.sqrt(cfg.tau2_true))


def gen_latent_subgroup(cfg: ScenarioConfig, rng):
    """Y = beta0 + beta1 X + v + e with X ~ Bernoulli(1/2); X is left out of the fit."""
    st = _as_streams(rng)
    b0, b1 = cfg.beta
    X = st[STREAM_LATENT].binomial(1, 0.5, cfg.K).astype(float)
    n = _sizes(cfg, st)
    mu = b0 + b1 * X
    return _finish(cfg, st, np.ones((cfg.K, 1)), mu, mu, n, ["intercept"])


def nonlinear_surface(U: np.ndarray, beta, gamma) -> np.ndarray:
    """Fixed-effects surface on four Uniform(0, 1) covariates."""
    x1, x2, x3, x4 = U.T
    g1, g2, g3, g4, g5, g6, g7 = gamma
    b0, b1, b2, b3, b4, b5 = beta
    return (b0 + b1 * x1
            + b2 * x2 ** g1 * (1 - x1) ** g2
            + b3 * x3 ** g3 * (1 - x1) ** g4
            + b4 * x1 ** g5 * (1 - x2) ** g6 * (1 - x3) ** g7
            + b5 * x4)


def gen_nonlinear_four(cfg: ScenarioConfig, rng):
    """Nonlinear four-covariate surface; the fit uses the linear model in X1..X4."""
    st = _as_streams(rng)
    U = st[STREAM_COVARIATES].uniform(0.0, 1.0, size=(cfg.K, 4))
    n = _sizes(cfg, st)
    gamma = tuple(cfg.gamma_scale * g for g in cfg.gamma)
    mu = nonlinear_surface(U, cfg.beta, gamma)
    X_fit = np.column_stack([np.ones(cfg.K), U])
    return _finish(cfg, st, X_fit, mu, mu, n, ["intercept", "x1", "x2", "x3", "x4"])


def synthetic_covariates(K: int, rng: np.random.Generator) -> np.ndarray:
    """School-level covariates with fixed, documented marginal laws.

    Columns (SYNTHETIC_COLUMNS): locale dummies from a categorical draw with
    probabilities city .30, suburban .35, town .10, rural .25; private ~
    Bernoulli(.15); income ~ Gamma(shape 4, scale 1.5) (mean 6, sd 3);
    teacher_grad ~ Beta(2, 2); parent1_college ~ Beta(3, 2);
    parent2_college ~ Beta(2, 3).
    """
    locale = rng.choice(4, size=K, p=[0.30, 0.35, 0.10, 0.25])
    cols = [
        (locale == 1).astype(float),
        (locale == 2).astype(float),
        (locale == 3).astype(float),
        rng.binomial(1, 0.15, K).astype(float),
        rng.gamma(4.0, 1.5, K),
        rng.beta(2.0, 2.0, K),
        rng.beta(3.0, 2.0, K),
        rng.beta(2.0, 3.0, K),
    ]
    return np.column_stack(cols)


def load_covariate_table(path: str):
    """Numeric CSV with a header row. Returns ``(matrix, column_names)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty covariate table")
    header, body = rows[0], rows[1:]
    out = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise InputError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise InputError(f"{path}: row {i + 2}, column {header[j]!r}: not a number: {cell!r}")
    if not np.all(np.isfinite(out)):
        raise InputError(f"{path}: covariate table contains non-finite values")
    return out, [h.strip() for h in header]


def gen_emulated(cfg: ScenarioConfig, covariate_table=None, rng=None):
    """Education-style design: linear model on a covariate table plus a latent
    binary confounder (coefficient ``beta[1]``) that the fit leaves out.

    ``covariate_table`` is ``(matrix, names)``; when None a synthetic table is
    drawn from the covariate stream.
    """
    st = _as_streams(rng)
    if covariate_table is None:
        C = synthetic_covariates(cfg.K, st[STREAM_COVARIATES])
        names = list(SYNTHETIC_COLUMNS)
    else:
        C, names = covariate_table
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] < cfg.K:
            raise InputError(f"covariate table needs at least K={cfg.K} rows")
        C = C[: cfg.K]
    if len(cfg.beta) != C.shape[1] + 2:
        raise InputError(
            f"emulated_education needs {C.shape[1] + 2} coefficients "
            f"(intercept, latent, {C.shape[1]} covariates); got {len(cfg.beta)}"
        )
    b = np.asarray(cfg.beta)
    Z = st[STREAM_LATENT].binomial(1, 0.5, cfg.K).astype(float)
    linpred = C @ b[2:]
    mu = b[0] + b[1] * Z + linpred
    n = _sizes(cfg, st)
    X_fit = np.column_stack([np.ones(cfg.K), C])
    return _finish(cfg, st, X_fit, mu, linpred, n, ["intercept", *names])


def generate(cfg: ScenarioConfig, replicate: int, covariate_table=None):
    st = Streams(cfg.seed, replicate)
    if cfg.kind == "latent_subgroup":
        return gen_latent_subgroup(cfg, st)
    if cfg.kind == "nonlinear_four":
        return gen_nonlinear_four(cfg, st)
    if covariate_table is None and cfg.covariates:
        covariate_table = load_covariate_table(cfg.covariates)
    return gen_emulated(cfg, covariate_table, st)


def _corr(a, b) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.std() == 0 or b.std() == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def surface_of(cfg: ScenarioConfig, data: Dataset, truth: LatentTruth) -> np.ndarray:
    """The fixed surface the alpha1 knob correlates with (for diagnostics)."""
    if cfg.kind == "emulated_education":
        return data.X[:, 1:] @ np.asarray(cfg.beta[2:])
    return truth.mu


def run_replicate(cfg: ScenarioConfig, replicate: int, mm: MMConfig = None,
                  covariate_table=None) -> list:
    """Generate, fit with every requested tau method, score. One row per method."""
    data, truth = generate(cfg, replicate, covariate_table)
    st = Streams(cfg.seed, replicate)
    rho1 = _corr(truth.v, surface_of(cfg, data, truth))
    rho2 = _corr(truth.v, data.n)
    rows = []
    for tm in cfg.tau_methods:
        opts = FitOptions(tau_method=tm, risk_order=cfg.order_h, mm=mm or MMConfig(),
                          nn_seed=st.int_seed(STREAM_FIT), standardize=cfg.standardize)
        res = fit(data, opts)
        scores = score(res, truth)
        for m in METHODS:
            rows.append({
                "replicate": replicate, "tau_method": tm, "method": m,
                **scores[m],
                "tau2_hat": res.tau.tau2, "tau_source": res.tau.method,
                "rho1": rho1, "rho2": rho2,
            })
    return rows


def _worker(args):
    cfg, r, mm, table = args
    try:
        return r, run_replicate(cfg, r, mm, table), None
    except (RopperError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return r, None, f"{type(exc).__name__}: {exc}"


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("RANK_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def summarize(rows: list, n_reps: int) -> list:
    out = []
    keys = sorted({(r["tau_method"], r["method"]) for r in rows},
                  key=lambda k: (k[0], METHODS.index(k[1])))
    for tm, m in keys:
        sel = [r for r in rows if r["tau_method"] == tm and r["method"] == m]
        vals = {k: np.array([r[k] for r in sel]) for k in
                ("psel", "psel_proper", "ppsel", "tau2_hat", "rho1", "rho2")}
        n = len(sel)

        def se(a):
            return float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")

        out.append({
            "tau_method": tm, "method": m,
            "mean_psel": float(vals["psel"].mean()), "se": se(vals["psel"]),
            "mean_psel_proper": float(vals["psel_proper"].mean()), "se_proper": se(vals["psel_proper"]),
            "mean_ppsel": float(vals["ppsel"].mean()),
            "mean_tau2_hat": float(vals["tau2_hat"].mean()),
            "mean_rho1": float(np.nanmean(vals["rho1"])) if np.any(np.isfinite(vals["rho1"])) else float("nan"),
            "mean_rho2": float(np.nanmean(vals["rho2"])) if np.any(np.isfinite(vals["rho2"])) else float("nan"),
            "n_reps": n,
        })
    return out


def run_scenario(cfg: ScenarioConfig, mm: MMConfig = None, workers: Optional[int] = None) -> SimResult:
    """Run every replicate of ``cfg`` and aggregate in replicate order."""
    table = load_covariate_table(cfg.covariates) if (
        cfg.kind == "emulated_education" and cfg.covariates) else None
    tasks = [(cfg, r, mm, table) for r in range(cfg.replicates)]
    nw = min(worker_count(workers), cfg.replicates)
    if nw <= 1:
        results = [_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(_worker, tasks, chunksize=max(1, len(tasks) // (4 * nw))))
    results.sort(key=lambda t: t[0])
    rows, failures = [], []
    for r, rr, err in results:
        if err is None:
            rows.extend(rr)
        else:
            failures.append((r, err))
    if len(failures) > MAX_FAILURE_RATE * cfg.replicates:
        raise RopperError(
            f"{len(failures)} of {cfg.replicates} replicates failed (limit 1%); first: {failures[0]}"
        )
    n_ok = cfg.replicates - len(failures)
    return SimResult(cfg.to_dict(), summarize(rows, n_ok), rows, len(failures), failures)


def calibrate_alpha(cfg: ScenarioConfig, which: str, target: float = 0.5,
                    pilot_reps: int = 50, lo: float = 0.0, hi: float = 10.0, iters: int = 30) -> float:
    """Bisection for the alpha knob giving a median realized correlation ``target``.

    ``which`` is "alpha1" (RE vs fixed surface) or "alpha2" (RE vs unit size).
    Pilot draws reuse the scenario's replicate streams, so the answer is
    deterministic.
    """
    if which not in ("alpha1", "alpha2"):
        raise InputError("which must be alpha1 or alpha2")

    def realized(alpha):
        c = dataclasses.replace(cfg, **{which: alpha, ("alpha2" if which == "alpha1" else "alpha1"): 0.0})
        vals = []
        for r in range(pilot_reps):
            data, truth = generate(c, r)
            other = surface_of(c, data, truth) if which == "alpha1" else data.n
            vals.append(_corr(truth.v, other))
        return float(np.nanmedian(vals))

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if realized(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
