"""Command-line entry point: run / sweep / heatmap / pattern / validate."""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, apply_overrides, config_from_dict, parse_config
from .engine import heatmap, run_drop
from .errors import ConfigurationError, DropError, StatisticsError
from .io import (write_drop_result, write_heatmap_csv, write_pattern_csv,
                 write_placements_csv)
from .ris import make_panel, panel_beam_pattern
from .geometry import NodePlacement


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON scenario file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--out", type=Path, default=Path("results"),
                        help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config field")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (results are thread-count invariant)")


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load_config(args) -> ScenarioConfig:
    cfg = parse_config(args.config) if args.config else config_from_dict({})
    overrides = _parse_overrides(args.overrides)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    if args.seed is not None:
        cfg = apply_overrides(cfg, {"seed": str(args.seed)})
    return cfg


def _cleanup(paths: list[Path]) -> None:
    for p in paths:
        try:
            p.unlink()
        except OSError:
            pass


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run_drop(cfg, threads=args.threads)
    written: list[Path] = []
    try:
        written = write_drop_result(result, args.out,
                                    dump_placements=args.dump_placements)
    except Exception:
        _cleanup(written)
        raise
    print(f"wrote {len(written)} files to {args.out}")
    for name, q in result.quantile_summary().items():
        print(f"  {name}: " + ", ".join(f"{k}={v:.2f}" for k, v in q.items()))
    return 0


def _cmd_sweep(args) -> int:
    overrides = _parse_overrides(args.overrides)
    sweep_axes = {k: v.split(",") for k, v in overrides.items() if "," in v}
    fixed = {k: v for k, v in overrides.items() if "," not in v}
    base = parse_config(args.config) if args.config else config_from_dict({})
    if fixed:
        base = apply_overrides(base, fixed)
    if args.seed is not None:
        base = apply_overrides(base, {"seed": str(args.seed)})
    keys = sorted(sweep_axes)
    grid = list(itertools.product(*(sweep_axes[k] for k in keys))) if keys else [()]
    for point_index, values in enumerate(grid):
        point = dict(zip(keys, values))
        cfg = apply_overrides(base, point) if point else base
        cfg = apply_overrides(cfg, {"seed": str(base.seed + point_index)})
        label = "_".join(f"{k}={v}" for k, v in point.items()) or "base"
        outdir = args.out / label
        result = run_drop(cfg, threads=args.threads)
        write_drop_result(result, outdir, dump_placements=args.dump_placements)
        print(f"[{point_index + 1}/{len(grid)}] {label} -> {outdir}")
    return 0


def _cmd_heatmap(args) -> int:
    cfg = _load_config(args)
    hm = heatmap(cfg, grid_step_m=args.step, threads=args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    written = [args.out / "heatmap.csv", args.out / "placements.csv"]
    try:
        write_heatmap_csv(hm, written[0])
        write_placements_csv([p.placement for p in hm.panels], written[1])
    except Exception:
        _cleanup(written)
        raise
    inside = hm.gain_db[hm.gain_db > 0]
    print(f"wrote {written[0]} ({hm.gain_db.size} points, "
          f"{inside.size} inside coverage, median gain "
          f"{np.median(inside) if inside.size else 0.0:.2f} dB)")
    return 0


def _cmd_pattern(args) -> int:
    cfg = _load_config(args)
    placement = NodePlacement(position=np.array([0.0, 0.0, 15.0]), kind="RIS",
                              boresight_azimuth_deg=0.0, mech_tilt_deg=0.0,
                              sector_id=0, node_id=0)
    panel = make_panel(placement, cfg.panel_grid, cfg.wavelength_m, cfg.phase_bits)
    if cfg.failure_rate > 0.0:
        from .ris import inject_failures
        from .streams import TAG_FAILURE, substream
        inject_failures(panel, cfg.failure_rate, substream(cfg.seed, TAG_FAILURE, 0))
    angles = np.arange(-90.0, 90.0 + args.resolution / 2, args.resolution)
    bp = panel_beam_pattern(panel, panel.phase_indices, (0.0, 0.0), angles)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "pattern.csv"
    write_pattern_csv(bp.angles_deg, bp.power_db, path)
    print(f"wrote {path}: peak {bp.peak_angle_deg:.2f} deg, "
          f"HPBW {bp.hpbw_deg:.2f} deg, sidelobe margin {bp.sidelobe_margin_db:.2f} dB")
    return 0


def _cmd_validate(args) -> int:
    cfg = _load_config(args)
    print(f"config OK ({cfg.rings}-ring, {cfg.panels_per_sector} panels/sector, "
          f"{cfg.panel_grid}x{cfg.panel_grid} elements)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rissim",
        description="System-level downlink simulator for RIS-aided multi-cell networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one drop and write result files")
    _add_common(p_run)
    p_run.add_argument("--dump-placements", action="store_true",
                       help="also write placements.csv")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="cartesian sweep over --set value lists")
    _add_common(p_sweep)
    p_sweep.add_argument("--dump-placements", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_heat = sub.add_parser("heatmap", help="RSRP-gain coverage map")
    _add_common(p_heat)
    p_heat.add_argument("--step", type=float, default=None,
                        help="grid step in meters (default from config)")
    p_heat.set_defaults(func=_cmd_heatmap)

    p_pat = sub.add_parser("pattern", help="panel beam-pattern dump")
    _add_common(p_pat)
    p_pat.add_argument("--resolution", type=float, default=0.05,
                       help="angle grid step in degrees")
    p_pat.set_defaults(func=_cmd_pattern)

    p_val = sub.add_parser("validate", help="check a config file and exit")
    _add_common(p_val)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DropError, StatisticsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
