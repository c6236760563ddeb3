"""Hexagonal multi-cell layout, wrap-around shifts, and random node drops."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DropError

BS_HEIGHT_M = 25.0
RIS_HEIGHT_M = 15.0
UE_HEIGHT_M = 1.5
BS_MECH_TILT_DEG = 0.0
RIS_MECH_TILT_DEG = 10.0
SECTOR_AZIMUTHS_DEG = (0.0, 120.0, 240.0)

MIN_PANEL_SPACING_M = 25.0
MIN_BS_UE_2D_M = 35.0
RIS_EDGE_BAND = (0.9, 1.0)    # radii fraction of cell radius, cell-edge mode
UE_EDGE_BAND = (0.85, 0.9)

_MAX_RESAMPLES = 10_000

# Hexagonal lattice index sets: (i, j) coefficients of the basis
# u = isd*(1, 0), v = isd*(1/2, sqrt(3)/2).
_CLUSTER_SHIFT_IJ = {0: None, 1: (2, 1), 2: (3, 2)}


@dataclass(frozen=True)
class Layout:
    """Site grid with per-site sector azimuths and wrap-around shift set."""

    site_positions: np.ndarray          # (n_sites, 2) meters
    sector_azimuths_deg: tuple[float, float, float]
    isd_m: float
    cell_radius_m: float
    wrap_shifts: np.ndarray             # (n_shifts, 2) meters, row 0 is zero

    @property
    def n_sites(self) -> int:
        return len(self.site_positions)

    @property
    def n_sectors(self) -> int:
        return 3 * self.n_sites

    def sector_site(self, sector_id: int) -> int:
        return sector_id // 3

    def sector_azimuth_deg(self, sector_id: int) -> float:
        return self.sector_azimuths_deg[sector_id % 3]


@dataclass
class NodePlacement:
    """One physical node: a BS sector, an RIS panel, or a UE."""

    position: np.ndarray                # (3,) meters
    kind: str                           # "BS" | "RIS" | "UE"
    boresight_azimuth_deg: float
    mech_tilt_deg: float
    sector_id: int
    node_id: int
    extras: dict = field(default_factory=dict)

    @property
    def height_m(self) -> float:
        return float(self.position[2])


def _lattice_basis(isd: float) -> tuple[np.ndarray, np.ndarray]:
    u = np.array([isd, 0.0])
    v = np.array([isd / 2.0, isd * np.sqrt(3.0) / 2.0])
    return u, v


def _hex_indices(rings: int) -> list[tuple[int, int]]:
    out = []
    for i in range(-rings, rings + 1):
        for j in range(-rings, rings + 1):
            if (abs(i) + abs(j) + abs(i + j)) // 2 <= rings:
                out.append((i, j))
    # Center first, then by ring and angle for a stable site numbering.
    def key(ij):
        i, j = ij
        x = i + j / 2.0
        y = j * np.sqrt(3.0) / 2.0
        ring = (abs(i) + abs(j) + abs(i + j)) // 2
        return (ring, np.arctan2(y, x) % (2 * np.pi))
    out.sort(key=key)
    return out


def build_layout(num_rings: int, isd: float) -> Layout:
    """Hexagonal site grid with the wrap-around shift set for its cluster size.

    ``num_rings`` of 0/1/2 give 1/7/19 sites (3 sectors each). The cell
    radius is defined as isd/sqrt(3), the circumradius of the hexagonal
    cell, and the wrap set holds the identity plus the six cluster
    translations (none for a single site).
    """
    if num_rings not in _CLUSTER_SHIFT_IJ:
        raise ConfigurationError(f"num_rings must be one of {sorted(_CLUSTER_SHIFT_IJ)}, got {num_rings}")
    if not isd > 0:
        raise ConfigurationError(f"isd must be positive, got {isd}")
    u, v = _lattice_basis(isd)
    sites = np.array([i * u + j * v for i, j in _hex_indices(num_rings)])
    shifts = [np.zeros(2)]
    base_ij = _CLUSTER_SHIFT_IJ[num_rings]
    if base_ij is not None:
        i, j = base_ij
        for _ in range(6):
            shifts.append(i * u + j * v)
            i, j = -j, i + j   # rotate the lattice vector by 60 degrees
    return Layout(
        site_positions=sites,
        sector_azimuths_deg=SECTOR_AZIMUTHS_DEG,
        isd_m=float(isd),
        cell_radius_m=float(isd) / np.sqrt(3.0),
        wrap_shifts=np.array(shifts),
    )


def wrapped_displacement(a, b, layout: Layout) -> np.ndarray:
    """2D displacement from a to the nearest wrap replica of b.

    Returns b' - a where b' = b + s minimizes |b + s - a| over the wrap
    shift set. Every pathloss and angle computation goes through this.
    """
    a = np.asarray(a, dtype=float)[:2]
    b = np.asarray(b, dtype=float)[:2]
    cand = b + layout.wrap_shifts - a
    return cand[np.argmin(np.einsum("ij,ij->i", cand, cand))]


def wrapped_displacements(a, bs, layout: Layout) -> np.ndarray:
    """Vectorized ``wrapped_displacement`` from one point a to many points."""
    a = np.asarray(a, dtype=float)[:2]
    bs = np.atleast_2d(np.asarray(bs, dtype=float))[:, :2]
    cand = bs[:, None, :] + layout.wrap_shifts[None, :, :] - a   # (n, s, 2)
    best = np.argmin(np.einsum("nsi,nsi->ns", cand, cand), axis=1)
    return cand[np.arange(len(bs)), best]


def _sector_center_and_azimuth(layout: Layout, sector_id: int) -> tuple[np.ndarray, float]:
    site = layout.site_positions[layout.sector_site(sector_id)]
    return site, layout.sector_azimuth_deg(sector_id)


def _draw_in_wedge(rng: np.random.Generator, azimuth_deg: float,
                   radius_band: tuple[float, float] | None, cell_radius: float,
                   min_radius: float = 0.0) -> np.ndarray:
    """One 2D offset inside a 120 degree wedge centered on the boresight.

    ``radius_band`` of None means uniform over the wedge area (density
    proportional to r); otherwise the radius is drawn uniformly inside
    band*cell_radius.
    """
    while True:
        az = np.deg2rad(azimuth_deg + rng.uniform(-60.0, 60.0))
        if radius_band is None:
            r = cell_radius * np.sqrt(rng.uniform())
        else:
            r = cell_radius * rng.uniform(radius_band[0], radius_band[1])
        if r >= min_radius:
            return np.array([r * np.cos(az), r * np.sin(az)])


def _min_wrapped_distance(xy: np.ndarray, placed: np.ndarray, layout: Layout) -> float:
    if len(placed) == 0:
        return np.inf
    return float(np.min(np.linalg.norm(wrapped_displacements(xy, placed, layout), axis=1)))


def _clamp_to_wedge(xy: np.ndarray, site: np.ndarray, boresight_deg: float,
                    band: tuple[float, float] | None, cell_radius: float) -> np.ndarray:
    rel = xy - site
    r = float(np.linalg.norm(rel))
    az = np.degrees(np.arctan2(rel[1], rel[0]))
    az_off = float(np.clip(-((-(az - boresight_deg) + 180.0) % 360.0 - 180.0), -60.0, 60.0))
    lo = band[0] * cell_radius if band else 0.0
    hi = (band[1] if band else 1.0) * cell_radius
    r = float(np.clip(r, lo, hi))
    a = np.deg2rad(boresight_deg + az_off)
    return site + r * np.array([np.cos(a), np.sin(a)])


def _slot_candidates(site: np.ndarray, boresight_deg: float,
                     band: tuple[float, float] | None, cell_radius: float,
                     rng: np.random.Generator) -> list[np.ndarray]:
    """Jittered lattice of guaranteed-compatible positions in one wedge.

    Rows are spaced 26 m radially and slots 27 m along the arc, with
    jitter small enough that any subset of slots is pairwise at least 25 m
    apart; rows and arcs are inset from the wedge boundaries so slots of
    adjacent sectors of the same site stay compatible too.
    """
    lo = band[0] * cell_radius if band else 0.0
    hi = (band[1] if band else 1.0) * cell_radius
    radii = np.arange(max(lo + 0.5, 13.5), hi - 0.5 + 1e-9, 26.0)
    slots = []
    for r in radii:
        inset_deg = np.degrees(13.5 / r)
        arc_step_deg = np.degrees(27.0 / r)
        azimuths = np.arange(boresight_deg - 60.0 + inset_deg,
                             boresight_deg + 60.0 - inset_deg + 1e-9, arc_step_deg)
        for az in azimuths:
            rr = r + rng.uniform(-0.4, 0.4)
            aa = np.deg2rad(az + np.degrees(rng.uniform(-0.4, 0.4) / r))
            slots.append(site + rr * np.array([np.cos(aa), np.sin(aa)]))
    return slots


def _drop_panels_with_slots(layout: Layout, per_sector: int,
                            band: tuple[float, float] | None,
                            rng: np.random.Generator) -> list[list[np.ndarray]]:
    """Fallback packing for deployments dense enough to jam rejection
    sampling (24 cell-edge panels per sector).

    Every sector draws its panels as a random subset of its compatible slot
    lattice, skipping slots blocked by panels already placed in other
    sectors. Cell corners are contested three ways, so a sector can come up
    short; it then also takes its least-blocked slots and a global
    repulsion relaxation resolves the remaining handful of conflicts.
    """
    per_sector_points: list[list[np.ndarray]] = []
    frozen_xy: list[np.ndarray] = []
    for sector_id in range(layout.n_sectors):
        site, azimuth = _sector_center_and_azimuth(layout, sector_id)
        frozen = np.array(frozen_xy) if frozen_xy else np.zeros((0, 2))
        slots = _slot_candidates(site, azimuth, band, layout.cell_radius_m, rng)
        spacing = [_min_wrapped_distance(s, frozen, layout) for s in slots]
        free = [i for i, d in enumerate(spacing) if d >= MIN_PANEL_SPACING_M]
        if len(slots) < per_sector:
            raise DropError(
                f"could not place {per_sector} panels in sector {sector_id}: "
                f"the spacing-compatible lattice holds only {len(slots)} positions")
        chosen_idx = [free[i] for i in rng.permutation(len(free))[:per_sector]]
        if len(chosen_idx) < per_sector:
            blocked = sorted((i for i in range(len(slots)) if i not in free),
                             key=lambda i: -spacing[i])
            chosen_idx.extend(blocked[:per_sector - len(chosen_idx)])
        chosen = [slots[i] for i in chosen_idx]
        per_sector_points.append(chosen)
        frozen_xy.extend(chosen)
    if not _relax_spacing_globally(per_sector_points, layout, band):
        raise DropError(
            f"could not satisfy the {MIN_PANEL_SPACING_M} m panel spacing for "
            f"{per_sector} panels per sector even after slot packing and relaxation")
    return per_sector_points


def _relax_spacing_globally(points_by_sector: list[list[np.ndarray]],
                            layout: Layout, band: tuple[float, float] | None,
                            max_iters: int = 400) -> bool:
    """Push violating panels apart (wrapped metric), keeping each inside its
    sector wedge and radial band. Mutates the lists in place; returns True
    when all pairwise spacings reach the minimum."""
    from scipy.spatial import cKDTree

    owners = [(s, k) for s, pts in enumerate(points_by_sector)
              for k in range(len(pts))]
    if not owners:
        return True
    for _ in range(max_iters):
        flat = np.array([points_by_sector[s][k] for s, k in owners])
        n = len(flat)
        replicas = np.concatenate([flat + shift for shift in layout.wrap_shifts])
        tree = cKDTree(replicas)
        neighbor_lists = tree.query_ball_point(flat, r=MIN_PANEL_SPACING_M + 0.2)
        moved = False
        for i, neighbors in enumerate(neighbor_lists):
            push = np.zeros(2)
            for j in neighbors:
                if j % n == i:
                    continue
                v = replicas[j] - flat[i]
                d = float(np.hypot(v[0], v[1]))
                if d < 1e-9:
                    push += np.array([0.37, 0.21])
                elif d < MIN_PANEL_SPACING_M + 0.2:
                    push -= (v / d) * (MIN_PANEL_SPACING_M + 0.2 - d) * 0.55
            if push.any():
                moved = True
                s, k = owners[i]
                site, azimuth = _sector_center_and_azimuth(layout, s)
                points_by_sector[s][k] = _clamp_to_wedge(
                    flat[i] + push, site, azimuth, band, layout.cell_radius_m)
        if not moved:
            break
    flat = np.array([points_by_sector[s][k] for s, k in owners])
    replicas = np.concatenate([flat + shift for shift in layout.wrap_shifts])
    tree = cKDTree(replicas)
    for i, neighbors in enumerate(tree.query_ball_point(flat, r=MIN_PANEL_SPACING_M)):
        for j in neighbors:
            if j % len(flat) != i and \
                    np.hypot(*(replicas[j] - flat[i])) < MIN_PANEL_SPACING_M:
                return False
    return True


def drop_ris_panels(layout: Layout, per_sector: int, placement: str,
                    rng: np.random.Generator) -> list[NodePlacement]:
    """Drop ``per_sector`` RIS panels in every sector.

    Cell-edge mode samples radii uniformly in [0.9, 1.0] of the cell
    radius; uniform mode samples uniformly over the sector wedge. Panels
    are rejection-resampled until all pairwise (wrapped) distances are at
    least 25 m; near band saturation the best rejected proposal is repaired
    by local repulsion. Each panel faces its serving BS and sits at 15 m
    with a 10 degree mechanical down-tilt.
    """
    if per_sector < 0:
        raise ConfigurationError(f"panels per sector must be >= 0, got {per_sector}")
    if placement not in ("uniform", "cell-edge"):
        raise ConfigurationError(f"unknown placement mode {placement!r}")
    band = RIS_EDGE_BAND if placement == "cell-edge" else None
    per_panel_budget = max(200, _MAX_RESAMPLES // max(per_sector, 1))

    def rejection_pass() -> list[list[np.ndarray]] | None:
        per_sector_points: list[list[np.ndarray]] = []
        frozen_xy: list[np.ndarray] = []
        for sector_id in range(layout.n_sectors):
            site, azimuth = _sector_center_and_azimuth(layout, sector_id)
            frozen = np.array(frozen_xy) if frozen_xy else np.zeros((0, 2))
            own: list[np.ndarray] = []
            for _ in range(per_sector):
                xy = None
                for _ in range(per_panel_budget):
                    cand = site + _draw_in_wedge(rng, azimuth, band, layout.cell_radius_m)
                    placed = np.concatenate([frozen, own]) if own else frozen
                    if _min_wrapped_distance(cand, placed, layout) >= MIN_PANEL_SPACING_M:
                        xy = cand
                        break
                if xy is None:
                    return None
                own.append(xy)
            per_sector_points.append(own)
            frozen_xy.extend(own)
        return per_sector_points

    points = rejection_pass()
    if points is None:
        # The deployment is dense enough to jam plain rejection sampling;
        # rebuild the whole drop on the compatible slot lattice.
        points = _drop_panels_with_slots(layout, per_sector, band, rng)

    panels: list[NodePlacement] = []
    for sector_id, own in enumerate(points):
        site, _ = _sector_center_and_azimuth(layout, sector_id)
        for xy in own:
            to_bs = site - xy
            panels.append(NodePlacement(
                position=np.array([xy[0], xy[1], RIS_HEIGHT_M]),
                kind="RIS",
                boresight_azimuth_deg=float(np.rad2deg(np.arctan2(to_bs[1], to_bs[0]))),
                mech_tilt_deg=RIS_MECH_TILT_DEG,
                sector_id=sector_id,
                node_id=len(panels),
            ))
    return panels


def drop_ues(layout: Layout, per_sector: int, placement: str,
             rng: np.random.Generator) -> list[NodePlacement]:
    """Drop ``per_sector`` UEs per sector at 1.5 m height.

    Cell-edge mode samples radii uniformly in [0.85, 0.9] of the cell
    radius; uniform mode is uniform over the wedge area with the 35 m
    minimum 2D distance from the site enforced by resampling.
    """
    if per_sector < 0:
        raise ConfigurationError(f"UEs per sector must be >= 0, got {per_sector}")
    if placement not in ("uniform", "cell-edge"):
        raise ConfigurationError(f"unknown placement mode {placement!r}")
    band = UE_EDGE_BAND if placement == "cell-edge" else None
    ues: list[NodePlacement] = []
    for sector_id in range(layout.n_sectors):
        site, azimuth = _sector_center_and_azimuth(layout, sector_id)
        for _ in range(per_sector):
            xy = site + _draw_in_wedge(rng, azimuth, band, layout.cell_radius_m,
                                       min_radius=MIN_BS_UE_2D_M)
            ues.append(NodePlacement(
                position=np.array([xy[0], xy[1], UE_HEIGHT_M]),
                kind="UE",
                boresight_azimuth_deg=float(rng.uniform(0.0, 360.0)),
                mech_tilt_deg=0.0,
                sector_id=sector_id,
                node_id=len(ues),
            ))
    return ues


def build_bs_placements(layout: Layout) -> list[NodePlacement]:
    """One placement per sector: site position at 25 m, sector boresight."""
    out = []
    for sector_id in range(layout.n_sectors):
        site, azimuth = _sector_center_and_azimuth(layout, sector_id)
        out.append(NodePlacement(
            position=np.array([site[0], site[1], BS_HEIGHT_M]),
            kind="BS",
            boresight_azimuth_deg=azimuth,
            mech_tilt_deg=BS_MECH_TILT_DEG,
            sector_id=sector_id,
            node_id=sector_id,
        ))
    return out
