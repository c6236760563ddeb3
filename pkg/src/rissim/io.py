"""Result serialization: the documented CSV schemas and the JSON summary.

All numbers are formatted with repr-faithful precision so identical drops
produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

from .engine import DropResult, HeatmapResult
from .geometry import NodePlacement

UE_CSV_HEADER = "ue_id,sector,panel_id,x_m,y_m,direct_db,cascaded_db,rsrp_dbm,sinr_db,ris_dist_m"
CDF_CSV_HEADER = "value,percentile"
HEATMAP_CSV_HEADER = "x_m,y_m,gain_db"
PLACEMENTS_CSV_HEADER = "kind,id,sector,x_m,y_m,z_m,azimuth_deg,tilt_deg"
PATTERN_CSV_HEADER = "angle_deg,power_db"


def _fmt(value: float) -> str:
    return format(float(value), ".10g")


def write_ue_csv(result: DropResult, path: Path) -> None:
    lines = [UE_CSV_HEADER]
    for r in result.records:
        cascaded = "" if r.panel_id is None else _fmt(r.cascaded_db)
        lines.append(",".join([
            str(r.ue_id),
            str(r.serving_sector),
            "" if r.panel_id is None else str(r.panel_id),
            _fmt(r.x_m), _fmt(r.y_m),
            _fmt(r.direct_db),
            cascaded,
            _fmt(r.rsrp_dbm), _fmt(r.sinr_db),
            "" if r.ris_distance_m is None else _fmt(r.ris_distance_m),
        ]))
    path.write_text("\n".join(lines) + "\n")


def write_cdf_csv(cdf, path: Path) -> None:
    lines = [CDF_CSV_HEADER]
    if cdf is not None:
        lines.extend(f"{_fmt(v)},{_fmt(p)}" for v, p in cdf.rows())
    path.write_text("\n".join(lines) + "\n")


def write_heatmap_csv(hm: HeatmapResult, path: Path) -> None:
    lines = [HEATMAP_CSV_HEADER]
    lines.extend(f"{_fmt(x)},{_fmt(y)},{_fmt(g)}" for x, y, g in hm.rows())
    path.write_text("\n".join(lines) + "\n")


def write_placements_csv(placements: list[NodePlacement], path: Path) -> None:
    lines = [PLACEMENTS_CSV_HEADER]
    for p in placements:
        lines.append(",".join([
            p.kind, str(p.node_id), str(p.sector_id),
            _fmt(p.position[0]), _fmt(p.position[1]), _fmt(p.position[2]),
            _fmt(p.boresight_azimuth_deg), _fmt(p.mech_tilt_deg),
        ]))
    path.write_text("\n".join(lines) + "\n")


def write_pattern_csv(angles_deg, power_db, path: Path) -> None:
    lines = [PATTERN_CSV_HEADER]
    lines.extend(f"{_fmt(a)},{_fmt(p)}" for a, p in zip(angles_deg, power_db))
    path.write_text("\n".join(lines) + "\n")


def write_summary_json(result: DropResult, path: Path) -> None:
    n_paired = sum(1 for r in result.records if r.panel_id is not None)
    payload = {
        "config": result.config.to_dict(),
        "seed": result.seed,
        "n_sites": result.layout.n_sites,
        "n_sectors": result.layout.n_sectors,
        "n_panels": len(result.panels),
        "n_ues": len(result.records),
        "n_paired": n_paired,
        "quantiles": result.quantile_summary(),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_drop_result(result: DropResult, outdir: Path,
                      dump_placements: bool = False) -> list[Path]:
    """Emit summary.json, ue.csv, cdf_rsrp.csv, cdf_sinr.csv (plus the
    optional placements dump and the paired-distance CDF when present).
    Returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, writer, *args) -> None:
        p = outdir / name
        writer(*args, p)
        written.append(p)

    emit("summary.json", write_summary_json, result)
    emit("ue.csv", write_ue_csv, result)
    emit("cdf_rsrp.csv", write_cdf_csv, result.cdf_rsrp)
    emit("cdf_sinr.csv", write_cdf_csv, result.cdf_sinr)
    if result.cdf_ris_distance is not None:
        emit("cdf_risdist.csv", write_cdf_csv, result.cdf_ris_distance)
    if dump_placements:
        emit("placements.csv", write_placements_csv, result.all_placements())
    return written
