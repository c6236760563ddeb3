#!/usr/bin/env python3
"""Beam patterns of a boresight-steered panel under element failures.

Dumps one angle_deg,power_db CSV per failure rate and prints the peak
direction, half-power beamwidth and peak-to-sidelobe margin of each, to
show how far the pattern degrades before the main lobe loses its margin.

    python3 scripts/failure_beam_patterns.py --grid 40 --out results/patterns
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from rissim.config import ScenarioConfig
from rissim.geometry import NodePlacement
from rissim.io import write_pattern_csv
from rissim.ris import inject_failures, make_panel, panel_beam_pattern
from rissim.streams import TAG_FAILURE, substream


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", type=int, default=40)
    parser.add_argument("--rates", type=float, nargs="+", default=[0.0, 0.05, 0.10])
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--resolution", type=float, default=0.05)
    parser.add_argument("--out", type=Path, default=Path("results/patterns"))
    args = parser.parse_args()

    cfg = ScenarioConfig(panel_grid=args.grid)
    angles = np.arange(-90.0, 90.0 + args.resolution / 2, args.resolution)
    args.out.mkdir(parents=True, exist_ok=True)
    for rate in args.rates:
        placement = NodePlacement(position=np.array([0.0, 0.0, 15.0]), kind="RIS",
                                  boresight_azimuth_deg=0.0, mech_tilt_deg=0.0,
                                  sector_id=0, node_id=0)
        panel = make_panel(placement, cfg.panel_grid, cfg.wavelength_m)
        if rate > 0:
            inject_failures(panel, rate, substream(args.seed, TAG_FAILURE, 0))
        bp = panel_beam_pattern(panel, panel.phase_indices, (0.0, 0.0), angles)
        path = args.out / f"pattern_fail{int(100 * rate)}.csv"
        write_pattern_csv(bp.angles_deg, bp.power_db, path)
        print(f"{rate:.0%} failed: peak {bp.peak_angle_deg:+.2f} deg, "
              f"HPBW {bp.hpbw_deg:.2f} deg, sidelobe margin "
              f"{bp.sidelobe_margin_db:.2f} dB -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
