"""Mean PSEL against the omitted subgroup effect beta1 (intercept-only fit).

Reproduces the layout of the latent-subgroup figure: one curve per method,
paired replicates at each grid point.

    python3 scripts/fig1_latent_subgroup.py --replicates 300 --sigma2 5
"""

import dataclasses

import numpy as np

from ropper.pipeline import METHODS
from ropper.sim import ScenarioConfig, run_scenario

from _common import METHOD_LABELS, parser, plot, save


def main():
    p = parser(__doc__.splitlines()[0], replicates=300)
    p.add_argument("--sigma2", type=float, default=5.0)
    p.add_argument("--K", type=int, default=50)
    p.add_argument("--grid", default="-2,-1.5,-1,-0.5,0,0.5,1,1.5,2")
    args = p.parse_args()
    grid = [float(x) for x in args.grid.split(",")]
    base = ScenarioConfig(kind="latent_subgroup", K=args.K, sigma2=args.sigma2,
                          replicates=args.replicates, seed=args.seed)
    rows, curves = [], {m: [] for m in METHODS}
    for b1 in grid:
        res = run_scenario(dataclasses.replace(base, beta=(1.0, b1)), workers=args.workers)
        diff, se = res.paired_difference("ropper", "pepp_mle")
        for s in res.summary:
            rows.append([b1, s["method"], s["mean_psel"], s["se"], s["mean_psel_proper"], s["n_reps"]])
            curves[s["method"]].append(s["mean_psel"])
        print(f"beta1={b1:+.2f}  " + "  ".join(f"{m}={res.mean(m):.5f}" for m in METHODS)
              + f"  ropper-pepp_mle={diff:+.2e} (se {se:.1e})")
    settings = dict(K=args.K, sigma2=args.sigma2, replicates=args.replicates, seed=args.seed)
    save(args.out, "fig1_latent_subgroup.csv",
         ["beta1", "method", "mean_psel", "se", "mean_psel_proper", "n_reps"], rows, settings)
    plot(args.out, "fig1_latent_subgroup.svg", np.array(grid),
         {METHOD_LABELS[m]: v for m, v in curves.items()},
         xlabel="beta1", ylabel="mean PSEL", title=f"K={args.K}, sigma2={args.sigma2}")


if __name__ == "__main__":
    main()
