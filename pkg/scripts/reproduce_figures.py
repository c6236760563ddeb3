#!/usr/bin/env python3
"""End-to-end reproduction driver for the evaluation campaign.

Runs the deployment-comparison drops (seven SINR CDFs), the panel-to-UE
distance CDFs, the cross-RIS interference comparison, the element-failure
sweep, and the coverage heat map, writing each run's CSVs under --out.
With --plot (requires matplotlib) the figure analogues are rendered via
plots/plot_results.py.

    python3 scripts/reproduce_figures.py --out results/        # desk scale
    python3 scripts/reproduce_figures.py --out results/ --full # 7-site scale
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
PLOTTER = REPO / "plots" / "plot_results.py"

DEPLOYMENTS = {
    "baseline": dict(panels_per_sector=0),
    "p4_g16_edge": dict(panels_per_sector=4, panel_grid=16),
    "p4_g16_unif": dict(panels_per_sector=4, panel_grid=16, panel_placement="uniform"),
    "p4_g40_edge": dict(panels_per_sector=4, panel_grid=40),
    "p4_g40_unif": dict(panels_per_sector=4, panel_grid=40, panel_placement="uniform"),
    "p8_g40_edge": dict(panels_per_sector=8, panel_grid=40),
    "p24_g16_edge": dict(panels_per_sector=24, panel_grid=16),
}


def run_drop_cfg(cfg: dict, outdir: Path, dump_placements: bool = False) -> None:
    from rissim.config import config_from_dict
    from rissim.engine import run_drop
    from rissim.io import write_drop_result

    result = run_drop(config_from_dict(cfg))
    write_drop_result(result, outdir, dump_placements=dump_placements)
    q = result.quantile_summary()
    sinr = q.get("sinr_db", {})
    print(f"  {outdir.name}: SINR p50 {sinr.get('p50', float('nan')):.2f} dB, "
          f"paired {sum(1 for r in result.records if r.panel_id is not None)}"
          f"/{len(result.records)}")


def run_heatmap_cfg(cfg: dict, outdir: Path) -> None:
    from rissim.config import config_from_dict
    from rissim.engine import heatmap
    from rissim.io import write_heatmap_csv, write_placements_csv

    hm = heatmap(config_from_dict(cfg), threads=4)
    outdir.mkdir(parents=True, exist_ok=True)
    write_heatmap_csv(hm, outdir / "heatmap.csv")
    write_placements_csv([p.placement for p in hm.panels], outdir / "placements.csv")
    covered = hm.gain_db[hm.gain_db > 0]
    print(f"  heatmap: {covered.size} covered points, median gain "
          f"{float(covered.size and __import__('numpy').median(covered)):.1f} dB")


def plot(kind: str, inputs: list[tuple[Path, str]], out: Path, **kw) -> None:
    args = [sys.executable, str(PLOTTER), "--kind", kind, "--out", str(out)]
    for path, label in inputs:
        args += ["--in", f"{path}={label}"]
    for key, value in kw.items():
        if value is not None:
            args += [f"--{key}", str(value)]
    subprocess.run(args, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--full", action="store_true",
                        help="7-site scale instead of the single-site desk scale")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--plot", action="store_true",
                        help="also render PNGs (requires matplotlib)")
    args = parser.parse_args()

    scale = dict(rings=1, ue_per_sector=50) if args.full else \
        dict(rings=0, ue_per_sector=30)
    base = dict(scale, seed=args.seed, panel_placement="cell-edge")

    print("deployment comparison (SINR CDFs)")
    for name, overrides in DEPLOYMENTS.items():
        run_drop_cfg(dict(base, ue_placement="cell-edge", **overrides),
                     args.out / "deploy" / name)

    print("panel-to-UE distance CDFs (uniform UEs)")
    for grid in (16, 40):
        run_drop_cfg(dict(base, ue_placement="uniform", panels_per_sector=4,
                          panel_grid=grid),
                     args.out / "distance" / f"g{grid}")

    print("cross-RIS interference on/off")
    for flag in (False, True):
        run_drop_cfg(dict(base, ue_placement="uniform", panels_per_sector=4,
                          panel_grid=40, cross_ris_interference=flag),
                     args.out / "crossris" / ("on" if flag else "off"))

    print("element-failure sweep")
    for rate in (0.0, 0.05, 0.10):
        run_drop_cfg(dict(base, ue_placement="uniform", panels_per_sector=4,
                          panel_grid=40, failure_rate=rate),
                     args.out / "failure" / f"rate{int(100 * rate)}")

    print("coverage heat map")
    run_heatmap_cfg(dict(base, ue_per_sector=1, panels_per_sector=4,
                         panel_grid=16, shadowing=False,
                         heatmap_step_m=10.0 if args.full else 5.0),
                    args.out / "coverage")

    if args.plot:
        print("rendering figures")
        figs = args.out / "figures"
        plot("cdf-overlay",
             [(args.out / "deploy" / n / "cdf_sinr.csv", n) for n in DEPLOYMENTS],
             figs / "sinr_deployments.png", xlabel="SINR (dB)")
        plot("cdf-overlay",
             [(args.out / "distance" / f"g{g}" / "cdf_risdist.csv", f"{g}x{g}")
              for g in (16, 40)],
             figs / "ris_ue_distance.png", xlabel="panel-to-UE distance (m)")
        plot("cdf-overlay",
             [(args.out / "crossris" / s / "cdf_sinr.csv", f"cross-RIS {s}")
              for s in ("off", "on")],
             figs / "cross_ris.png", xlabel="SINR (dB)")
        plot("cdf-overlay",
             [(args.out / "failure" / f"rate{r}" / "cdf_sinr.csv", f"{r}% failed")
              for r in (0, 5, 10)],
             figs / "failure_sweep.png", xlabel="SINR (dB)")
        plot("heatmap",
             [(args.out / "coverage" / "heatmap.csv", "gain")],
             figs / "coverage_map.png",
             placements=args.out / "coverage" / "placements.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
