#!/usr/bin/env python3
"""Figure generation from simulator CSV output.

Consumes only the documented CSV schemas (cdf_*.csv: value,percentile;
heatmap.csv: x_m,y_m,gain_db; placements.csv) and renders either an overlay
of CDF curves or a coverage-gain heat map with panel markers. Inputs are
never modified and the output image carries no timestamps, so reruns are
byte-identical.

Usage:
    python3 plot_results.py --kind cdf-overlay \
        --in results/a/cdf_sinr.csv="4 panels" \
        --in results/b/cdf_sinr.csv="8 panels" \
        --out sinr_cdfs.png --xlabel "SINR (dB)"

    python3 plot_results.py --kind heatmap --in results/heatmap.csv=gain \
        --placements results/placements.csv --out coverage.png
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CDF_COLUMNS = ["value", "percentile"]
HEATMAP_COLUMNS = ["x_m", "y_m", "gain_db"]
PLACEMENT_COLUMNS = ["kind", "id", "sector", "x_m", "y_m", "z_m",
                     "azimuth_deg", "tilt_deg"]

PLOT_KINDS = ("cdf-overlay", "heatmap")


class PlotInputError(ValueError):
    """An input file is missing, malformed, or inconsistent."""


@dataclass
class PlotSpec:
    kind: str
    inputs: list[tuple[Path, str]]
    output: Path
    xlabel: str | None = None
    ylabel: str | None = None
    title: str | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise PlotInputError(f"kind must be one of {PLOT_KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise PlotInputError("at least one --in path=label is required")
        labels = [label for _, label in self.inputs]
        if len(set(labels)) != len(labels):
            raise PlotInputError(f"labels must be unique, got {labels}")


def _read_rows(path: Path, expected_columns: list[str]) -> list[dict]:
    if not path.exists():
        raise PlotInputError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotInputError(f"{path}: empty file, expected header "
                                 f"{','.join(expected_columns)}")
        missing = [c for c in expected_columns if c not in reader.fieldnames]
        if missing:
            raise PlotInputError(f"{path}: missing column(s) {', '.join(missing)} "
                                 f"(found {', '.join(reader.fieldnames)})")
        rows = list(reader)
    if not rows:
        raise PlotInputError(f"{path}: no data rows")
    return rows


def read_cdf(path: Path) -> tuple[np.ndarray, np.ndarray]:
    rows = _read_rows(path, CDF_COLUMNS)
    values = np.array([float(r["value"]) for r in rows])
    pct = np.array([float(r["percentile"]) for r in rows])
    if np.any(np.diff(values) < 0) or np.any(np.diff(pct) < 0):
        raise PlotInputError(f"{path}: value/percentile columns must be sorted")
    return values, pct


def read_heatmap(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = _read_rows(path, HEATMAP_COLUMNS)
    xs = np.array([float(r["x_m"]) for r in rows])
    ys = np.array([float(r["y_m"]) for r in rows])
    gains = np.array([float(r["gain_db"]) for r in rows])
    ux, uy = np.unique(xs), np.unique(ys)
    if len(ux) * len(uy) != len(rows):
        raise PlotInputError(f"{path}: irregular grid, {len(rows)} rows do not "
                             f"fill a {len(ux)}x{len(uy)} lattice")
    grid = np.full((len(uy), len(ux)), np.nan)
    ix = np.searchsorted(ux, xs)
    iy = np.searchsorted(uy, ys)
    grid[iy, ix] = gains
    if np.isnan(grid).any():
        raise PlotInputError(f"{path}: irregular grid, duplicate or missing cells")
    return ux, uy, grid


def read_panel_positions(path: Path) -> np.ndarray:
    rows = _read_rows(path, PLACEMENT_COLUMNS)
    pts = [(float(r["x_m"]), float(r["y_m"])) for r in rows if r["kind"] == "RIS"]
    return np.array(pts).reshape(-1, 2)


def _new_axes(spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(7.0, 5.0), dpi=130)
    if spec.xlabel:
        ax.set_xlabel(spec.xlabel)
    if spec.ylabel:
        ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title)
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)
    return fig, ax


def _save(fig, output: Path) -> Path:
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, metadata={"Software": None})
    plt.close(fig)
    return output


def plot_cdfs(spec: PlotSpec) -> Path:
    """Overlay of empirical CDF curves, one per input file."""
    curves = [(label, *read_cdf(path)) for path, label in spec.inputs]
    fig, ax = _new_axes(spec)
    for label, values, pct in curves:
        ax.plot(values, pct, linewidth=1.6, label=label)
    ax.set_ylim(0.0, 1.0)
    if spec.ylabel is None:
        ax.set_ylabel("CDF")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, spec.output)


def plot_heatmap(spec: PlotSpec, placements: Path | None = None) -> Path:
    """Gridded gain map from the first input, with RIS panel markers."""
    path, _ = spec.inputs[0]
    xs, ys, grid = read_heatmap(path)
    fig, ax = _new_axes(spec)
    mesh = ax.pcolormesh(xs, ys, grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="RSRP gain (dB)")
    if placements is not None:
        if placements.exists():
            panels = read_panel_positions(placements)
            if len(panels):
                ax.plot(panels[:, 0], panels[:, 1], "r.", markersize=5,
                        label="RIS panels")
                ax.legend(fontsize=8, loc="upper right")
        else:
            warnings.warn(f"placements file not found, markers omitted: {placements}")
    ax.set_aspect("equal")
    if spec.xlabel is None:
        ax.set_xlabel("x (m)")
    if spec.ylabel is None:
        ax.set_ylabel("y (m)")
    return _save(fig, spec.output)


def _parse_input(arg: str) -> tuple[Path, str]:
    if "=" in arg:
        path, label = arg.split("=", 1)
    else:
        path, label = arg, Path(arg).stem
    return Path(path), label


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--kind", choices=PLOT_KINDS, required=True)
    parser.add_argument("--in", dest="inputs", action="append", default=[],
                        metavar="PATH=LABEL", help="input CSV (repeatable)")
    parser.add_argument("--out", type=Path, required=True, help="output PNG path")
    parser.add_argument("--placements", type=Path, default=None,
                        help="placements.csv for panel markers (heatmap only)")
    parser.add_argument("--xlabel", default=None)
    parser.add_argument("--ylabel", default=None)
    parser.add_argument("--title", default=None)
    parser.add_argument("--xlim", type=float, nargs=2, default=None)
    parser.add_argument("--ylim", type=float, nargs=2, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(kind=args.kind,
                        inputs=[_parse_input(a) for a in args.inputs],
                        output=args.out, xlabel=args.xlabel, ylabel=args.ylabel,
                        title=args.title,
                        xlim=tuple(args.xlim) if args.xlim else None,
                        ylim=tuple(args.ylim) if args.ylim else None)
        if spec.kind == "cdf-overlay":
            out = plot_cdfs(spec)
        else:
            out = plot_heatmap(spec, placements=args.placements)
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
