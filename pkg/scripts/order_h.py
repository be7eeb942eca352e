"""ROPPER with risk-estimate order H = 1..4 on the latent-subgroup design."""

import dataclasses

import numpy as np

from ropper.sim import ScenarioConfig, run_scenario

from _common import parser, plot, save


def main():
    p = parser(__doc__.splitlines()[0], replicates=300)
    p.add_argument("--orders", default="1,2,3,4")
    p.add_argument("--tau2", type=float, default=0.75)
    p.add_argument("--grid", default="-1,0,1")
    args = p.parse_args()
    orders = [int(h) for h in args.orders.split(",")]
    grid = [float(x) for x in args.grid.split(",")]
    base = ScenarioConfig(kind="latent_subgroup", K=50, sigma2=5.0, tau2_true=args.tau2,
                          replicates=args.replicates, seed=args.seed)
    rows, curves = [], {f"H={h}": [] for h in orders}
    for b1 in grid:
        ref = None
        for h in orders:
            res = run_scenario(dataclasses.replace(base, beta=(1.0, b1), order_h=h), workers=args.workers)
            loss = res.losses("ropper")
            ref = loss if ref is None else ref
            d = loss - ref
            se = d.std(ddof=1) / np.sqrt(d.size) if h != orders[0] else 0.0
            rows.append([b1, h, loss.mean(), res.mean("ropper", "psel_proper"), d.mean(), se])
            curves[f"H={h}"].append(loss.mean())
            print(f"beta1={b1:+.1f} H={h} PSEL {loss.mean():.6f}  vs H={orders[0]}: {d.mean():+.2e} (se {se:.1e})")
    settings = dict(tau2=args.tau2, replicates=args.replicates, seed=args.seed)
    save(args.out, "order_h.csv", ["beta1", "order_h", "mean_psel", "mean_psel_proper",
                                   "diff_vs_first", "se_diff"], rows, settings)
    plot(args.out, "order_h.svg", np.array(grid), curves, xlabel="beta1", ylabel="mean PSEL (ROPPER)",
         title=f"tau2={args.tau2}")


if __name__ == "__main__":
    main()
