"""Command-line entry point: ``fit``, ``simulate`` and ``validate``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__, config
from .errors import RopperError
from .io import (format_value, provenance_lines, read_input_table, sha256_file, sha256_text,
                 svg_line_chart, write_csv)
from .pipeline import METHODS, fit
from .sim import run_scenario

SUMMARY_PARAMS = ("kind", "K", "sigma2", "tau2_true", "re_dist", "alpha1", "alpha2",
                  "n_min", "n_max", "gamma_scale", "order_h", "seed")
SUMMARY_STATS = ("mean_psel", "se", "n_reps", "mean_psel_proper", "se_proper", "mean_ppsel",
                 "mean_tau2_hat", "mean_rho1", "mean_rho2")
REPLICATE_COLS = ("replicate", "tau_method", "method", "psel", "ppsel", "psel_proper",
                  "ppsel_proper", "tau2_hat", "tau_source", "rho1", "rho2")


def _load_config(path, overrides):
    text = config.read_config_file(path) if path else ""
    return config.load(text, overrides, source=path or "<defaults>")


def cmd_fit(args) -> int:
    overrides = []
    if args.tau:
        overrides.append(f"fit.tau_method={args.tau}")
    if args.order_h is not None:
        overrides.append(f"fit.order_h={args.order_h}")
    if args.intercept:
        overrides.append("fit.intercept=true")
    if args.standardize:
        overrides.append("fit.standardize=true")
    cfg = _load_config(args.config, overrides)
    out = args.out or cfg["output.dir"]
    data = read_input_table(args.input, intercept=cfg["fit.intercept"])
    res = fit(data, config.fit_options(cfg))
    cfg_text = config.dump(cfg)
    prov = provenance_lines(cfg_text, cfg["fit.nn_seed"], sha256_file(args.input))
    os.makedirs(out, exist_ok=True)

    header = ["id"]
    for m in METHODS:
        header += [f"{m}_raw", f"{m}_proper"]
    rows = []
    for k in range(data.K):
        row = [data.ids[k]]
        for m in METHODS:
            raw = res.percentiles[m]["raw"]
            row += [raw.values[k] if raw is not None else None, res.percentiles[m]["proper"].values[k]]
        rows.append(row)
    write_csv(os.path.join(out, "percentiles.csv"), header, rows, prov)

    extra = [f"# tau2={format_value(res.tau.tau2)}", f"# tau_source={res.tau.method}",
             f"# mm_iterations={res.mm_trace.n_iter}", f"# mm_stop={res.mm_trace.reason}",
             f"# qhat_mle={format_value(res.qhat_mle)}", f"# qhat_rfure={format_value(res.qhat_rfure)}"]
    write_csv(os.path.join(out, "coefficients.csv"), ["term", "beta_mle", "beta_rfure"],
              [[c, a, b] for c, a, b in zip(data.columns, res.beta_mle, res.beta_rfure)], prov + extra)

    d = res.diagnostics
    keys = ("y", "sigma", "fitted_mle", "fitted_rfure", "B", "V", "R")
    write_csv(os.path.join(out, "diagnostics.csv"), ["id", *keys],
              [[d["id"][k], *(d[c][k] for c in keys)] for k in range(data.K)], prov)

    print(f"ropper {__version__}  input_sha256={sha256_file(args.input)[:16]}  seed={cfg['fit.nn_seed']}")
    print(f"tau^2 = {res.tau.tau2:.6g} ({res.tau.method}); MM {res.mm_trace.n_iter} iterations, "
          f"stop={res.mm_trace.reason}")
    w = max(len(c) for c in data.columns)
    print(f"{'term':<{w}}  {'beta_mle':>12}  {'beta_rfure':>12}")
    for c, a, b in zip(data.columns, res.beta_mle, res.beta_rfure):
        print(f"{c:<{w}}  {a:12.6f}  {b:12.6f}")
    print(f"wrote percentiles.csv, coefficients.csv, diagnostics.csv to {out}")
    return 0


def _summary_row(pcfg, sweep_key, sweep_value, s, n_failed):
    sc = config.scenario_config(pcfg)
    params = [getattr(sc, p) for p in SUMMARY_PARAMS]
    beta = " ".join(format_value(float(b)) for b in sc.beta)
    return [*params, beta, sweep_key or "", sweep_value, s["tau_method"], s["method"],
            *(s[k] for k in SUMMARY_STATS), n_failed]


def cmd_simulate(args) -> int:
    overrides = []
    if args.sweep:
        key, vals = config.parse_sweep(args.sweep)
        overrides += [f"sweep.key={key}", "sweep.values=" + ",".join(repr(v) for v in vals)]
    cfg = _load_config(args.config, overrides)
    out = args.out or cfg["output.dir"]
    cfg_text = config.dump(cfg)
    prov = provenance_lines(cfg_text, cfg["scenario.seed"], sha256_text(cfg_text))
    summary, reps = [], []
    for value, pcfg in config.sweep_points(cfg):
        sc = config.scenario_config(pcfg)
        res = run_scenario(sc, config.mm_config(pcfg), workers=args.workers)
        for s in res.summary:
            summary.append(_summary_row(pcfg, cfg["sweep.key"], value, s, res.n_failed))
        for r in res.replicates:
            reps.append([value, *(r[c] for c in REPLICATE_COLS)])
        for r, err in res.failures:
            print(f"warning: replicate {r} failed: {err}", file=sys.stderr)
    os.makedirs(out, exist_ok=True)
    header = [*SUMMARY_PARAMS, "beta", "sweep_key", "sweep_value", "tau_method", "method",
              *SUMMARY_STATS, "n_failed"]
    write_csv(os.path.join(out, "psel_summary.csv"), header, summary, prov)
    write_csv(os.path.join(out, "psel_replicates.csv"), ["sweep_value", *REPLICATE_COLS], reps, prov)

    if args.plot:
        ix = {name: i for i, name in enumerate(header)}
        xs = sorted({row[ix["sweep_value"]] if row[ix["sweep_value"]] is not None else 0.0
                     for row in summary})
        series = {}
        for row in summary:
            name = f"{row[ix['method']]} ({row[ix['tau_method']]})"
            x = row[ix["sweep_value"]] if row[ix["sweep_value"]] is not None else 0.0
            series.setdefault(name, {})[x] = row[ix["mean_psel"]]
        svg_line_chart(os.path.join(out, "curves.svg"), xs,
                       {k: [v.get(x, np.nan) for x in xs] for k, v in series.items()},
                       xlabel=cfg["sweep.key"] or "", ylabel="mean PSEL",
                       title=f"{cfg['scenario.kind']}, K={cfg['scenario.K']}, "
                             f"sigma2={cfg['scenario.sigma2']}")

    print(f"ropper {__version__}  config_sha256={sha256_text(cfg_text)[:16]}  seed={cfg['scenario.seed']}")
    ix = {name: i for i, name in enumerate(header)}
    for row in summary:
        sv = "" if row[ix["sweep_value"]] is None else f"{cfg['sweep.key']}={row[ix['sweep_value']]:g}  "
        print(f"{sv}{row[ix['tau_method']]:>4}  {row[ix['method']]:<14} "
              f"PSEL {row[ix['mean_psel']]:.5f} (se {row[ix['se']]:.5f}, n={row[ix['n_reps']]})")
    print(f"wrote psel_summary.csv, psel_replicates.csv{', curves.svg' if args.plot else ''} to {out}")
    return 0


def cmd_validate(args) -> int:
    from . import validate
    report = validate.run_all()
    for s in report["suites"]:
        print(f"{'PASS' if s['passed'] else 'FAIL'}  {s['name']}  ({s['seconds']:.2f}s)")
    if args.json:
        with open(args.json, "w", encoding="utf-8", newline="") as fh:
            fh.write(validate.to_json(report) + "\n")
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ropper", description="Ranking-targeted percentile estimation.")
    p.add_argument("--version", action="version", version=f"ropper {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit all four ranking methods to a unit table")
    f.add_argument("input")
    f.add_argument("--config")
    f.add_argument("--tau", choices=("reml", "nn"))
    f.add_argument("--order-h", type=int, dest="order_h")
    f.add_argument("--intercept", action="store_true", help="prepend a column of ones")
    f.add_argument("--standardize", action="store_true", help="standardize covariates for the NN split")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a simulation scenario (optionally swept)")
    s.add_argument("--config", required=True)
    s.add_argument("--sweep", help="key=v1,v2,... e.g. scenario.beta.1=-1,0,1")
    s.add_argument("--plot", action="store_true", help="also write curves.svg")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, help="worker processes (default: RANK_THREADS or CPU count)")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run the built-in property suites")
    v.add_argument("--json")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RopperError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
