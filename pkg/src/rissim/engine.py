"""Drop orchestration: association, RIS configuration, RSRP/SINR evaluation
with configurable interference composition, and statistics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cascade import (element_amplitudes_and_phases, leg_elements_to_points,
                      leg_source_to_elements, resolve_wrapped)
from .config import ScenarioConfig
from .errors import StatisticsError
from .geometry import (Layout, NodePlacement, build_bs_placements, build_layout,
                       drop_ris_panels, drop_ues, wrapped_displacements)
from .radio import (RadioContext, bs_sector_gain, direction_angles, los_probability,
                    shadow_sigma_db, uma_pathloss)
from .ris import RisPanel, conjugate_phase_indices, default_codebook, inject_failures, \
    make_panel, sweep_codebook
from .streams import (TAG_FAILURE, TAG_GRID_RIS, TAG_GRID_SITE, TAG_RIS_DROP,
                      TAG_RIS_UE, TAG_SITE_RIS, TAG_SITE_UE, TAG_UE_DROP,
                      keyed_normal, keyed_uniform, substream)


@dataclass(frozen=True)
class InterferenceFlags:
    """Which interference terms enter the SINR denominator."""

    include_neighbor_direct: bool = True
    include_cross_ris: bool = False

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "InterferenceFlags":
        return cls(include_neighbor_direct=True,
                   include_cross_ris=cfg.cross_ris_interference)


@dataclass
class UeRecord:
    """Per-UE outcome of one drop."""

    ue_id: int
    serving_sector: int
    panel_id: int | None
    x_m: float
    y_m: float
    direct_gain: float              # linear
    cascaded_gain: float            # linear, 0 when unpaired
    rsrp_dbm: float
    sinr_db: float
    ris_distance_m: float | None

    @property
    def direct_db(self) -> float:
        return 10.0 * math.log10(self.direct_gain)

    @property
    def cascaded_db(self) -> float | None:
        if self.panel_id is None or self.cascaded_gain <= 0.0:
            return None
        return 10.0 * math.log10(self.cascaded_gain)


class Cdf:
    """Empirical CDF: sorted samples with percentile k/n for the k-th of n."""

    def __init__(self, samples):
        samples = np.asarray(list(samples), dtype=float)
        if samples.size == 0:
            raise StatisticsError("cdf of an empty sample set")
        self.values = np.sort(samples)
        self.percentiles = np.arange(1, len(self.values) + 1) / len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def rows(self):
        return list(zip(self.values.tolist(), self.percentiles.tolist()))

    def quantile(self, p: float) -> float:
        """Linear interpolation on the (percentile, value) polyline; p at or
        below 1/n returns the smallest sample."""
        return float(np.interp(p, self.percentiles, self.values))


def cdf(samples) -> Cdf:
    return Cdf(samples)


def compute_rsrp(combined_gain_linear: float, tx_power_dbm: float) -> float:
    """Wideband full-power RSRP proxy: tx power plus combined link gain."""
    return tx_power_dbm + 10.0 * math.log10(combined_gain_linear)


def compute_sinr_db(signal_mw: float, interference_mw: float, noise_mw: float) -> float:
    return 10.0 * math.log10(signal_mw / (interference_mw + noise_mw))


@dataclass
class DropResult:
    config: ScenarioConfig
    seed: int
    layout: Layout
    bs_placements: list[NodePlacement]
    panels: list[RisPanel]
    ue_placements: list[NodePlacement]
    records: list[UeRecord]
    cdf_rsrp: Cdf | None
    cdf_sinr: Cdf | None
    cdf_ris_distance: Cdf | None

    def quantile_summary(self) -> dict:
        out = {}
        for name, c in (("rsrp_dbm", self.cdf_rsrp), ("sinr_db", self.cdf_sinr)):
            if c is not None:
                out[name] = {f"p{int(100 * p)}": c.quantile(p) for p in (0.05, 0.50, 0.95)}
        return out

    def all_placements(self) -> list[NodePlacement]:
        return [*self.bs_placements, *[p.placement for p in self.panels],
                *self.ue_placements]


def _direct_gain_matrix(layout: Layout, ues: list[NodePlacement],
                        ctx: RadioContext) -> np.ndarray:
    """(n_sectors, n_ues) linear direct gains through wrap-around.

    LOS and shadowing are keyed per (site, ue): co-sited sectors share the
    physical path and differ only in their sector beam gain.
    """
    n_ues = len(ues)
    gains = np.zeros((layout.n_sectors, n_ues))
    if n_ues == 0:
        return gains
    ue_xy = np.array([u.position[:2] for u in ues])
    ue_ids = np.arange(n_ues)
    for site_idx, site in enumerate(layout.site_positions):
        disp = wrapped_displacements(site, ue_xy, layout)
        az, el, d2d, d3d = direction_angles(disp, 1.5 - 25.0)
        p_los = los_probability(d2d, 1.5)
        los, shadow = ctx.hop_draw(TAG_SITE_UE, (site_idx, ue_ids), p_los)
        pl = uma_pathloss(d3d, d2d, ctx.fc_ghz, 25.0, 1.5, los)
        for k in range(3):
            g = bs_sector_gain(az, el, layout.sector_azimuths_deg[k])
            gains[3 * site_idx + k] = 10.0 ** ((g - pl - shadow) / 10.0)
    return gains


def associate(gains: np.ndarray) -> np.ndarray:
    """Serving sector per UE: argmax direct gain, ties to the lowest id."""
    return np.argmax(gains, axis=0)


def _hop2_draws(ctx: RadioContext, panel: RisPanel, ue_ids: np.ndarray,
                d2d: np.ndarray, rx_height):
    p = los_probability(d2d, rx_height)
    return ctx.hop_draw(TAG_RIS_UE, (panel.node_id, ue_ids), p)


def _panel_candidate_gains(panel: RisPanel, bs: NodePlacement,
                           ues: list[NodePlacement], ue_ids: np.ndarray,
                           ctx: RadioContext):
    """Cascaded gains (linear) of one panel toward each candidate UE, each
    evaluated under its own conjugate configuration. Returns
    (gains, indices (elements, n), distances)."""
    center = panel.placement.position
    bs_eff = resolve_wrapped(bs.position, center, ctx.layout)
    ue_eff = np.array([resolve_wrapped(u.position, center, ctx.layout) for u in ues])
    d2d1 = float(np.hypot(*(bs_eff[:2] - center[:2])))
    los1, sh1 = ctx.hop_draw(TAG_SITE_RIS, (bs.sector_id // 3, panel.node_id),
                             los_probability(d2d1, center[2]))
    d2d2 = np.hypot(ue_eff[:, 0] - center[0], ue_eff[:, 1] - center[1])
    los2, sh2 = _hop2_draws(ctx, panel, ue_ids, d2d2, ue_eff[:, 2])

    amp, psi = element_amplitudes_and_phases(panel, bs_eff, ue_eff, ctx, los1, los2)
    indices = conjugate_phase_indices(psi, panel.phase_bits)
    phases = indices * (2.0 * np.pi / panel.n_levels)
    sums = np.sum(amp * np.exp(1j * (psi + phases)), axis=0)

    d = center - bs_eff
    az, el, _, _ = direction_angles(d[:2], d[2])
    g_bs = bs_sector_gain(az, el, bs.boresight_azimuth_deg, bs.mech_tilt_deg)
    gains = np.abs(sums) ** 2 * 10.0 ** ((g_bs - sh1 - sh2) / 10.0)
    distances = np.linalg.norm(ue_eff - center, axis=1)
    return gains, indices, distances


def _final_gains_for_panel(panel: RisPanel, bs: NodePlacement,
                           served: list[NodePlacement], ue_ids: np.ndarray,
                           indices: np.ndarray, ctx: RadioContext):
    """Cascaded gains of one panel toward its served UEs, each under its own
    commanded grid (column of ``indices``) with the frozen failure state
    applied. Returns (gains (n,), distances (n,))."""
    center = panel.placement.position
    bs_eff = resolve_wrapped(bs.position, center, ctx.layout)
    ue_eff = np.array([resolve_wrapped(u.position, center, ctx.layout) for u in served])
    d2d1 = float(np.hypot(*(bs_eff[:2] - center[:2])))
    los1, sh1 = ctx.hop_draw(TAG_SITE_RIS, (bs.sector_id // 3, panel.node_id),
                             los_probability(d2d1, center[2]))
    d2d2 = np.hypot(ue_eff[:, 0] - center[0], ue_eff[:, 1] - center[1])
    los2, sh2 = _hop2_draws(ctx, panel, ue_ids, d2d2, ue_eff[:, 2])

    amp, psi = element_amplitudes_and_phases(panel, bs_eff, ue_eff, ctx, los1, los2)
    failed = panel.failed.reshape(-1)[:, None]
    frozen = panel.frozen_indices.reshape(-1)[:, None]
    applied = np.where(failed, frozen, indices)
    phases = applied * (2.0 * np.pi / panel.n_levels)
    totals = np.abs(np.sum(amp * np.exp(1j * (psi + phases)), axis=0)) ** 2

    d = center - bs_eff
    az, el, _, _ = direction_angles(d[:2], d[2])
    g_bs = bs_sector_gain(az, el, bs.boresight_azimuth_deg, bs.mech_tilt_deg)
    gains = totals * 10.0 ** ((g_bs - float(sh1) - np.asarray(sh2)) / 10.0)
    return gains, np.linalg.norm(ue_eff - center, axis=1)


def _cross_ris_interference(panels: list[RisPanel], ues: list[NodePlacement],
                            serving: np.ndarray,
                            serving_panel: list[int | None],
                            ctx: RadioContext, threads: int = 1) -> np.ndarray:
    """Per-UE linear interference gain reflected by RIS panels.

    Every panel re-radiates every base station's signal with its frozen
    configuration; contributions whose source is the UE's serving sector
    are excluded (intra-cell resources are orthogonal), as is the UE's own
    serving panel.
    """
    n_ues = len(ues)
    layout = ctx.layout
    k_wave = 2.0 * np.pi / ctx.wavelength_m
    ue_ids = np.arange(n_ues)
    total = np.zeros(n_ues)

    def one_panel(panel: RisPanel) -> np.ndarray:
        center = panel.placement.position
        ue_eff = np.array([resolve_wrapped(u.position, center, layout) for u in ues])
        d2d2 = np.hypot(ue_eff[:, 0] - center[0], ue_eff[:, 1] - center[1])
        los2, sh2 = _hop2_draws(ctx, panel, ue_ids, d2d2, ue_eff[:, 2])
        amp2, dist2 = leg_elements_to_points(panel, ue_eff, ctx, los2)
        # Hop-2 element matrix shared by all sources; the applied element
        # phases and RIS->UE shadowing fold into it.
        m2 = amp2 * np.exp(1j * (k_wave * dist2 + panel.applied_phases()[:, None]))
        m2 *= 10.0 ** (-np.asarray(sh2) / 20.0)

        source_cols = np.empty((panel.n_elements, layout.n_sites), dtype=complex)
        sector_gain_lin = np.empty(layout.n_sectors)
        for site_idx, site in enumerate(layout.site_positions):
            bs_eff = resolve_wrapped(np.array([site[0], site[1], 25.0]), center, layout)
            d2d1 = float(np.hypot(*(bs_eff[:2] - center[:2])))
            los1, sh1 = ctx.hop_draw(TAG_SITE_RIS, (site_idx, panel.node_id),
                                     los_probability(d2d1, center[2]))
            amp1, dist1 = leg_source_to_elements(panel, bs_eff, ctx, los1)
            source_cols[:, site_idx] = amp1 * np.exp(1j * k_wave * dist1) \
                * 10.0 ** (-sh1 / 20.0)
            d = center - bs_eff
            az, el, _, _ = direction_angles(d[:2], d[2])
            for k in range(3):
                g = bs_sector_gain(az, el, layout.sector_azimuths_deg[k])
                sector_gain_lin[3 * site_idx + k] = 10.0 ** (g / 10.0)
        site_power = np.abs(source_cols.T @ m2) ** 2          # (sites, ues)
        contrib = site_power[np.arange(layout.n_sectors) // 3] \
            * sector_gain_lin[:, None]                        # (sectors, ues)
        # Exclude each UE's serving sector as a source for this panel.
        panel_total = np.sum(contrib, axis=0) - contrib[serving, ue_ids]
        # Exclude the UE's own serving panel entirely.
        mask = np.array([sp == panel.node_id for sp in serving_panel])
        panel_total[mask] = 0.0
        return panel_total

    if threads > 1 and len(panels) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(one_panel, panels):
                total += part
    else:
        for panel in panels:
            total += one_panel(panel)
    return total


@dataclass
class _Pairing:
    panel_for_ue: list[int | None]              # ue -> its paired panel, if any
    ue_for_panel: dict[int, int]                # panel -> its contention winner
    signal_indices: dict[int, np.ndarray]       # ue -> conjugate grid toward it


def _pair_and_configure(cfg: ScenarioConfig, layout: Layout,
                        bss: list[NodePlacement], panels: list[RisPanel],
                        ues: list[NodePlacement], gains: np.ndarray,
                        serving: np.ndarray, ctx: RadioContext,
                        threads: int = 1) -> _Pairing:
    """Pair UEs to serving-sector panels and freeze panel configurations.

    Every UE proposes its best candidate panel (conjugate-configured toward
    that UE) if the candidate clears the pairing threshold; every panel
    accepts its best proposer; losers fall back to direct-only. Unpaired
    panels hold the all-zero configuration. Failures are injected last and
    stay frozen.
    """
    n_ues = len(ues)
    panels_by_sector: dict[int, list[RisPanel]] = {}
    for p in panels:
        panels_by_sector.setdefault(p.sector_id, []).append(p)
    for plist in panels_by_sector.values():
        plist.sort(key=lambda p: p.node_id)

    proposals: dict[int, list[tuple[float, int]]] = {}
    best_panel: list[int | None] = [None] * n_ues
    best_gain = np.zeros(n_ues)
    signal_indices: dict[int, np.ndarray] = {}

    def eval_sector(sector: int):
        ue_idx = np.nonzero(serving == sector)[0]
        plist = panels_by_sector.get(sector, [])
        if len(ue_idx) == 0 or not plist:
            return sector, ue_idx, None
        sector_ues = [ues[i] for i in ue_idx]
        bs = bss[sector]
        rows = [_panel_candidate_gains(p, bs, sector_ues, ue_idx, ctx) for p in plist]
        return sector, ue_idx, rows

    sectors = range(layout.n_sectors)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(eval_sector, sectors))
    else:
        results = [eval_sector(s) for s in sectors]

    for sector, ue_idx, rows in results:
        if rows is None:
            continue
        plist = panels_by_sector[sector]
        gain_rows = np.array([r[0] for r in rows])           # (n_panels, n_ues_s)
        for col, ue_i in enumerate(ue_idx):
            row = int(np.argmax(gain_rows[:, col]))
            g = float(gain_rows[row, col])
            direct = gains[sector, ue_i]
            if direct > 0 and 10.0 * math.log10(g) >= \
                    10.0 * math.log10(direct) + cfg.pairing_threshold_db:
                panel = plist[row]
                best_panel[ue_i] = panel.node_id
                best_gain[ue_i] = g
                signal_indices[int(ue_i)] = rows[row][1][:, col]
                proposals.setdefault(panel.node_id, []).append((g, int(ue_i)))

    ue_for_panel: dict[int, int] = {}
    for p in panels:
        props = proposals.get(p.node_id)
        if props:
            g_best, ue_best = props[0]
            for g, u in props[1:]:
                if g > g_best:
                    g_best, ue_best = g, u
            ue_for_panel[p.node_id] = ue_best

    # Freeze every panel: contention winners get their conjugate (or swept)
    # configuration, the rest hold all-zero indices. Failures come last and
    # stay frozen for the drop.
    for p in panels:
        if p.node_id in ue_for_panel:
            u = ue_for_panel[p.node_id]
            idx = signal_indices[u]
            if cfg.codebook_mode:
                bs = bss[p.sector_id]
                center = p.placement.position
                bs_eff = resolve_wrapped(bs.position, center, layout)
                ue_eff = resolve_wrapped(ues[u].position, center, layout)
                book = default_codebook(p, bs_eff, max_entries=cfg.codebook_max_entries)
                entry = sweep_codebook(p, bs_eff, ue_eff, book)
                idx = book[entry].reshape(-1)
                signal_indices[u] = idx
            p.set_indices(idx.reshape(p.n_rows, p.n_cols))
        else:
            p.set_indices(np.zeros((p.n_rows, p.n_cols), dtype=np.int64))
        if cfg.failure_rate > 0.0:
            inject_failures(p, cfg.failure_rate,
                            substream(ctx.seed, TAG_FAILURE, p.node_id))

    panel_for_ue: list[int | None] = [None] * n_ues
    if cfg.serving_mode == "per_ue":
        panel_for_ue = best_panel
    else:
        for panel_id, u in ue_for_panel.items():
            panel_for_ue[u] = panel_id

    return _Pairing(panel_for_ue=panel_for_ue, ue_for_panel=ue_for_panel,
                    signal_indices=signal_indices)


def run_drop(config: ScenarioConfig, seed: int | None = None,
             threads: int = 1) -> DropResult:
    """One deterministic drop: layout, placements, link gains, pairing,
    panel configuration, failures, and per-UE RSRP/SINR statistics.

    Identical (config, seed) give bit-identical results for any thread
    count: every random quantity is keyed, never drawn from shared state.
    """
    seed = config.seed if seed is None else seed
    layout = build_layout(config.rings, config.isd_m)
    bss = build_bs_placements(layout)
    panel_placements = drop_ris_panels(layout, config.panels_per_sector,
                                       config.panel_placement,
                                       substream(seed, TAG_RIS_DROP))
    ues = drop_ues(layout, config.ue_per_sector, config.ue_placement,
                   substream(seed, TAG_UE_DROP))
    panels = [make_panel(pl, config.panel_grid, config.wavelength_m,
                         config.phase_bits) for pl in panel_placements]
    ctx = RadioContext(layout=layout, fc_ghz=config.carrier_ghz, seed=seed,
                       shadowing=config.shadowing, los_mode=config.los_mode,
                       near_field_exact=config.near_field_exact)

    gains = _direct_gain_matrix(layout, ues, ctx)
    serving = associate(gains) if len(ues) else np.zeros(0, dtype=int)

    pairing = _pair_and_configure(config, layout, bss, panels, ues, gains,
                                  serving, ctx, threads=threads)

    cascaded = np.zeros(len(ues))
    ris_dist: list[float | None] = [None] * len(ues)
    panel_by_id = {p.node_id: p for p in panels}
    served_by_panel: dict[int, list[int]] = {}
    for ue_i, panel_id in enumerate(pairing.panel_for_ue):
        if panel_id is not None:
            served_by_panel.setdefault(panel_id, []).append(ue_i)
    for panel_id, ue_list in served_by_panel.items():
        panel = panel_by_id[panel_id]
        idx = np.column_stack([pairing.signal_indices[u] for u in ue_list])
        gains_final, dists = _final_gains_for_panel(
            panel, bss[panel.sector_id], [ues[u] for u in ue_list],
            np.array(ue_list), idx, ctx)
        for k, u in enumerate(ue_list):
            cascaded[u] = float(gains_final[k])
            ris_dist[u] = float(dists[k])

    tx_mw = 10.0 ** (config.tx_power_dbm / 10.0)
    noise_mw = 10.0 ** (config.noise_dbm / 10.0)
    flags = InterferenceFlags.from_config(config)

    n_ues = len(ues)
    ue_ids = np.arange(n_ues)
    direct_serving = gains[serving, ue_ids] if n_ues else np.zeros(0)
    i_direct = (np.sum(gains, axis=0) - direct_serving) * tx_mw
    i_cross = np.zeros(n_ues)
    if flags.include_cross_ris and panels and n_ues:
        i_cross = tx_mw * _cross_ris_interference(
            panels, ues, serving, pairing.panel_for_ue, ctx, threads=threads)

    records = []
    for i in range(n_ues):
        combined = direct_serving[i] + cascaded[i]
        rsrp = compute_rsrp(combined, config.tx_power_dbm)
        sinr = compute_sinr_db(tx_mw * combined, i_direct[i] + i_cross[i], noise_mw)
        records.append(UeRecord(
            ue_id=i,
            serving_sector=int(serving[i]),
            panel_id=pairing.panel_for_ue[i],
            x_m=float(ues[i].position[0]),
            y_m=float(ues[i].position[1]),
            direct_gain=float(direct_serving[i]),
            cascaded_gain=float(cascaded[i]),
            rsrp_dbm=rsrp,
            sinr_db=sinr,
            ris_distance_m=ris_dist[i],
        ))

    paired_d = [r.ris_distance_m for r in records if r.ris_distance_m is not None]
    return DropResult(
        config=config, seed=seed, layout=layout, bs_placements=bss,
        panels=panels, ue_placements=ues, records=records,
        cdf_rsrp=Cdf([r.rsrp_dbm for r in records]) if records else None,
        cdf_sinr=Cdf([r.sinr_db for r in records]) if records else None,
        cdf_ris_distance=Cdf(paired_d) if paired_d else None,
    )


@dataclass
class HeatmapResult:
    xs: np.ndarray
    ys: np.ndarray
    gain_db: np.ndarray             # (len(ys), len(xs))
    panels: list[RisPanel] = field(default_factory=list)

    def rows(self):
        for iy, y in enumerate(self.ys):
            for ix, x in enumerate(self.xs):
                yield float(x), float(y), float(self.gain_db[iy, ix])


def _grid_key_ints(x: np.ndarray, y: np.ndarray):
    return (np.round(x * 1000.0).astype(np.int64),
            np.round(y * 1000.0).astype(np.int64))


def heatmap(config: ScenarioConfig, grid_step_m: float | None = None,
            seed: int | None = None, threads: int = 1,
            chunk: int = 4096) -> HeatmapResult:
    """RSRP-gain map over the network: virtual UEs at 1.5 m on a grid.

    At each grid point the serving sector's panels are conjugate-configured
    toward the point itself (a coverage-map genie); where the pairing
    criterion passes, the gain is RSRP with the paired panel minus the
    RIS-free RSRP at identical link draws, otherwise exactly 0. Grid-point
    randomness is keyed by the absolute point coordinates, so overlapping
    grids agree wherever they share points.
    """
    seed = config.seed if seed is None else seed
    step = config.heatmap_step_m if grid_step_m is None else grid_step_m
    layout = build_layout(config.rings, config.isd_m)
    bss = build_bs_placements(layout)
    panel_placements = drop_ris_panels(layout, config.panels_per_sector,
                                       config.panel_placement,
                                       substream(seed, TAG_RIS_DROP))
    panels = [make_panel(pl, config.panel_grid, config.wavelength_m,
                         config.phase_bits) for pl in panel_placements]
    for p in panels:
        if config.failure_rate > 0.0:
            inject_failures(p, config.failure_rate, substream(seed, TAG_FAILURE, p.node_id))
    ctx = RadioContext(layout=layout, fc_ghz=config.carrier_ghz, seed=seed,
                       shadowing=config.shadowing, los_mode=config.los_mode,
                       near_field_exact=config.near_field_exact)

    # Grid nodes sit at integer multiples of the step in absolute
    # coordinates, so differently-sized maps agree wherever they overlap.
    reach = layout.cell_radius_m + config.heatmap_margin_m
    xs = step * np.arange(math.floor((layout.site_positions[:, 0].min() - reach) / step),
                          math.ceil((layout.site_positions[:, 0].max() + reach) / step) + 1)
    ys = step * np.arange(math.floor((layout.site_positions[:, 1].min() - reach) / step),
                          math.ceil((layout.site_positions[:, 1].max() + reach) / step) + 1)
    px, py = np.meshgrid(xs, ys)
    points = np.column_stack([px.ravel(), py.ravel()])
    n_pts = len(points)
    xq, yq = _grid_key_ints(points[:, 0], points[:, 1])

    # Direct gains per sector at every grid point.
    gains = np.zeros((layout.n_sectors, n_pts))
    for site_idx, site in enumerate(layout.site_positions):
        disp = wrapped_displacements(site, points, layout)
        az, el, d2d, d3d = direction_angles(disp, 1.5 - 25.0)
        p_los = los_probability(d2d, 1.5)
        if ctx.los_mode == "los":
            los = np.ones(n_pts, dtype=bool)
        elif ctx.los_mode == "nlos":
            los = np.zeros(n_pts, dtype=bool)
        else:
            los = keyed_uniform(seed, TAG_GRID_SITE, site_idx, xq, yq, slot=0) < p_los
        shadow = (keyed_normal(seed, TAG_GRID_SITE, site_idx, xq, yq, slot=1)
                  * shadow_sigma_db(los)) if ctx.shadowing else 0.0
        pl = uma_pathloss(d3d, d2d, ctx.fc_ghz, 25.0, 1.5, los)
        for k in range(3):
            g = bs_sector_gain(az, el, layout.sector_azimuths_deg[k])
            gains[3 * site_idx + k] = 10.0 ** ((g - pl - shadow) / 10.0)
    serving = np.argmax(gains, axis=0)
    direct = gains[serving, np.arange(n_pts)]

    best_casc = np.zeros(n_pts)
    panels_by_sector: dict[int, list[RisPanel]] = {}
    for p in panels:
        panels_by_sector.setdefault(p.sector_id, []).append(p)
    for plist in panels_by_sector.values():
        plist.sort(key=lambda p: p.node_id)

    tasks = []
    for sector, plist in panels_by_sector.items():
        pts_idx = np.nonzero(serving == sector)[0]
        for p in plist:
            for start in range(0, len(pts_idx), chunk):
                tasks.append((p, sector, pts_idx[start:start + chunk]))

    def eval_task(task):
        panel, sector, idx = task
        if len(idx) == 0:
            return idx, np.zeros(0)
        center = panel.placement.position
        bs = bss[sector]
        bs_eff = resolve_wrapped(bs.position, center, layout)
        disp = wrapped_displacements(center, points[idx], layout)
        pt_eff = np.column_stack([center[0] + disp[:, 0], center[1] + disp[:, 1],
                                  np.full(len(idx), 1.5)])
        d2d1 = float(np.hypot(*(bs_eff[:2] - center[:2])))
        los1, sh1 = ctx.hop_draw(TAG_SITE_RIS, (sector // 3, panel.node_id),
                                 los_probability(d2d1, center[2]))
        d2d2 = np.hypot(pt_eff[:, 0] - center[0], pt_eff[:, 1] - center[1])
        p_los2 = los_probability(d2d2, 1.5)
        if ctx.los_mode == "los":
            los2 = np.ones(len(idx), dtype=bool)
        elif ctx.los_mode == "nlos":
            los2 = np.zeros(len(idx), dtype=bool)
        else:
            los2 = keyed_uniform(seed, TAG_GRID_RIS, panel.node_id, xq[idx], yq[idx],
                                 slot=0) < p_los2
        sh2 = (keyed_normal(seed, TAG_GRID_RIS, panel.node_id, xq[idx], yq[idx],
                            slot=1) * shadow_sigma_db(los2)) if ctx.shadowing else 0.0
        amp, psi = element_amplitudes_and_phases(panel, bs_eff, pt_eff, ctx, los1, los2)
        indices = conjugate_phase_indices(psi, panel.phase_bits)
        applied = np.where(panel.failed.reshape(-1)[:, None],
                           panel.frozen_indices.reshape(-1)[:, None], indices)
        phases = applied * (2.0 * np.pi / panel.n_levels)
        sums = np.sum(amp * np.exp(1j * (psi + phases)), axis=0)
        d = center - bs_eff
        az, el, _, _ = direction_angles(d[:2], d[2])
        g_bs = bs_sector_gain(az, el, bs.boresight_azimuth_deg, bs.mech_tilt_deg)
        return idx, np.abs(sums) ** 2 * 10.0 ** ((g_bs - sh1 - sh2) / 10.0)

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(eval_task, tasks))
    else:
        results = [eval_task(t) for t in tasks]
    for idx, casc in results:
        np.maximum.at(best_casc, idx, casc)

    with np.errstate(divide="ignore"):
        paired = 10.0 * np.log10(np.where(best_casc > 0, best_casc, 1.0)) \
            >= 10.0 * np.log10(direct) + config.pairing_threshold_db
    paired &= best_casc > 0
    gain_db = np.zeros(n_pts)
    gain_db[paired] = 10.0 * np.log10(1.0 + best_casc[paired] / direct[paired])
    return HeatmapResult(xs=xs, ys=ys,
                         gain_db=gain_db.reshape(len(ys), len(xs)),
                         panels=panels)
