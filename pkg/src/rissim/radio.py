"""Large-scale channel primitives: antenna patterns, LOS probability,
Urban-Macro pathloss, shadow fading, and per-link power gains.

Angle conventions used throughout: azimuth is measured counterclockwise
from the +x axis in degrees; elevation is the angle above the horizontal
plane. Pattern offsets are separable: the azimuth offset is the wrapped
azimuth difference from the boresight azimuth and the elevation offset is
the elevation difference from the (down-tilted) boresight elevation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import Layout, NodePlacement, wrapped_displacement
from .streams import keyed_normal, keyed_uniform

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0

SHADOW_SIGMA_LOS_DB = 4.0
SHADOW_SIGMA_NLOS_DB = 6.0

BS_ELECTRONIC_TILT_DEG = 4.0


@dataclass(frozen=True)
class PatternParams:
    """Parametric single-element pattern (two quadratic cuts with clips)."""

    peak_gain_dbi: float
    h_beamwidth_deg: float
    v_beamwidth_deg: float
    a_max_db: float = 30.0
    sla_v_db: float = 30.0

    def __post_init__(self):
        if self.h_beamwidth_deg <= 0 or self.v_beamwidth_deg <= 0:
            raise ValueError("beamwidths must be positive")
        if self.a_max_db <= 0 or self.sla_v_db <= 0:
            raise ValueError("attenuation limits must be positive")


# Effective sector beam of the BS (the physical array is collapsed into one
# 17 dBi wide-beam pattern). The vertical beamwidth is chosen so the
# integrated gain is consistent with the 17 dBi peak.
BS_SECTOR_PATTERN = PatternParams(17.0, 65.0, 10.0, 30.0, 30.0)

# RIS element pattern (each split component peaks at 5 dBi at boresight).
RIS_ELEMENT_PATTERN = PatternParams(5.0, 65.0, 65.0, 30.0, 30.0)


@dataclass(frozen=True)
class LinkGain:
    """Large-scale budget of one TX-RX pair."""

    los: bool
    pathloss_db: float
    shadow_db: float
    tx_gain_db: float
    rx_gain_db: float

    @property
    def total_db(self) -> float:
        return self.tx_gain_db + self.rx_gain_db - self.pathloss_db - self.shadow_db

    @property
    def total_linear(self) -> float:
        return 10.0 ** (self.total_db / 10.0)


def wrap_angle_deg(angle):
    """Wrap to (-180, 180]."""
    a = np.asarray(angle, dtype=float)
    wrapped = -((-a + 180.0) % 360.0 - 180.0)
    return wrapped if wrapped.ndim else float(wrapped)


def element_pattern(az_offset_deg, el_offset_deg, params: PatternParams):
    """Pattern gain in dB at the given boresight offsets.

    Vertical cut attenuation min(12 (d_el/bw_v)^2, SLA_V), horizontal cut
    min(12 (d_az/bw_h)^2, A_max), combined attenuation capped at A_max;
    gain = peak - attenuation. Accepts scalars or arrays.
    """
    az = np.abs(wrap_angle_deg(az_offset_deg))
    el = np.asarray(el_offset_deg, dtype=float)
    a_v = np.minimum(12.0 * (el / params.v_beamwidth_deg) ** 2, params.sla_v_db)
    a_h = np.minimum(12.0 * (az / params.h_beamwidth_deg) ** 2, params.a_max_db)
    attenuation = np.minimum(a_v + a_h, params.a_max_db)
    gain = params.peak_gain_dbi - attenuation
    return gain if gain.ndim else float(gain)


def bs_sector_gain(azimuth_deg, elevation_deg, boresight_azimuth_deg,
                   mech_tilt_deg: float = 0.0,
                   electronic_tilt_deg: float = BS_ELECTRONIC_TILT_DEG,
                   pattern: PatternParams = BS_SECTOR_PATTERN):
    """Sector beam gain toward a direction given in global azimuth/elevation.

    The boresight is depressed by the mechanical plus electronic tilt.
    """
    az_off = wrap_angle_deg(np.asarray(azimuth_deg, dtype=float) - boresight_azimuth_deg)
    el_off = np.asarray(elevation_deg, dtype=float) + mech_tilt_deg + electronic_tilt_deg
    return element_pattern(az_off, el_off, pattern)


def los_probability(d2d_m, rx_height_m):
    """Urban-Macro LOS probability.

    Equals 1 up to 18 m 2D distance; beyond that the standard expression
    applies, with the high-receiver correction ((h-13)/10)^1.5 for
    receivers above 13 m (the RIS panels at 15 m).
    """
    d = np.asarray(d2d_m, dtype=float)
    h = np.asarray(rx_height_m, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = 18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)
        c_h = np.where(h > 13.0, ((np.maximum(h, 13.0) - 13.0) / 10.0) ** 1.5, 0.0)
        boost = 1.0 + c_h * (5.0 / 4.0) * (d / 100.0) ** 3 * np.exp(-d / 150.0)
        p = np.where(d <= 18.0, 1.0, np.minimum(base * boost, 1.0))
    return p if p.ndim else float(p)


def breakpoint_distance_m(fc_ghz, tx_height_m, rx_height_m):
    """Dual-slope breakpoint with 1 m effective environment height."""
    h_tx = np.maximum(np.asarray(tx_height_m, dtype=float) - 1.0, 0.0)
    h_rx = np.maximum(np.asarray(rx_height_m, dtype=float) - 1.0, 0.0)
    return 4.0 * h_tx * h_rx * (np.asarray(fc_ghz, dtype=float) * 1e9) / SPEED_OF_LIGHT


def uma_pathloss(d3d_m, d2d_m, fc_ghz, tx_height_m, rx_height_m, los):
    """Urban-Macro pathloss in dB (LOS dual-slope / NLOS max construction).

    The same expression serves the BS-RIS, RIS-UE and BS-UE links with
    their respective endpoint heights; ``rx_height_m`` is the terminal-side
    height. 3D distances below 1 m are clamped to 1 m with a logged
    warning. All distance/height/los arguments broadcast.
    """
    d3d = np.asarray(d3d_m, dtype=float)
    if np.any(d3d < 1.0):
        logger.warning("uma_pathloss: clamping %d distance(s) below 1 m",
                       int(np.count_nonzero(d3d < 1.0)))
        d3d = np.maximum(d3d, 1.0)
    d2d = np.asarray(d2d_m, dtype=float)
    fc = np.asarray(fc_ghz, dtype=float)
    h_rx = np.asarray(rx_height_m, dtype=float)
    d_bp = breakpoint_distance_m(fc, tx_height_m, h_rx)
    log_d3d = np.log10(d3d)
    log_fc = np.log10(fc)
    pl1 = 28.0 + 22.0 * log_d3d + 20.0 * log_fc
    pl2 = (28.0 + 40.0 * log_d3d + 20.0 * log_fc
           - 9.0 * np.log10(d_bp ** 2 + (np.asarray(tx_height_m, dtype=float) - h_rx) ** 2))
    pl_los = np.where(d2d <= d_bp, pl1, pl2)
    pl_nlos = (13.54 + 39.08 * log_d3d + 20.0 * log_fc
               - 0.6 * (h_rx - 1.5))
    pl = np.where(np.asarray(los), pl_los, np.maximum(pl_los, pl_nlos))
    return pl if pl.ndim else float(pl)


def shadow_sigma_db(los):
    l = np.asarray(los)
    s = np.where(l, SHADOW_SIGMA_LOS_DB, SHADOW_SIGMA_NLOS_DB)
    return s if s.ndim else float(s)


def shadow_fading(rng: np.random.Generator, los: bool, enabled: bool) -> float:
    """One zero-mean log-normal shadowing draw in dB (0 when disabled)."""
    if not enabled:
        return 0.0
    return float(rng.normal(0.0, SHADOW_SIGMA_LOS_DB if los else SHADOW_SIGMA_NLOS_DB))


def direction_angles(displacement_2d, dz):
    """(azimuth_deg, elevation_deg, d2d, d3d) of a displacement."""
    disp = np.asarray(displacement_2d, dtype=float)
    dx, dy = disp[..., 0], disp[..., 1]
    d2d = np.hypot(dx, dy)
    d3d = np.hypot(d2d, dz)
    az = np.degrees(np.arctan2(dy, dx))
    el = np.degrees(np.arctan2(dz, d2d))
    return az, el, d2d, d3d


@dataclass(frozen=True)
class RadioContext:
    """Scenario-wide channel state shared by all link evaluations.

    All randomness is keyed: ``hop_draw`` maps (tag, ids) to the same LOS
    state and shadowing value no matter when or where it is called.
    """

    layout: Layout
    fc_ghz: float
    seed: int
    shadowing: bool = True
    los_mode: str = "random"     # "random" | "los" | "nlos"
    near_field_exact: bool = True
    element_pattern: PatternParams = RIS_ELEMENT_PATTERN
    bs_pattern: PatternParams = BS_SECTOR_PATTERN

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / (self.fc_ghz * 1e9)

    def hop_draw(self, tag: int, ids: tuple, p_los):
        """(los, shadow_db) for one link, fixed for the whole drop."""
        if self.los_mode == "los":
            los = np.full(np.shape(p_los), True) if np.ndim(p_los) else True
        elif self.los_mode == "nlos":
            los = np.full(np.shape(p_los), False) if np.ndim(p_los) else False
        else:
            u = keyed_uniform(self.seed, tag, *ids, slot=0)
            los = u < np.asarray(p_los)
            if not np.ndim(p_los):
                los = bool(los)
        if self.shadowing:
            shadow = keyed_normal(self.seed, tag, *ids, slot=1) * shadow_sigma_db(los)
            if not np.ndim(p_los):
                shadow = float(shadow)
        else:
            shadow = np.zeros(np.shape(p_los)) if np.ndim(p_los) else 0.0
        return los, shadow


def pattern_gain_for_node(node: NodePlacement, azimuth_deg, elevation_deg,
                          ctx: RadioContext):
    """Gain of ``node``'s antenna toward a global direction, in dB."""
    if node.kind == "BS":
        return bs_sector_gain(azimuth_deg, elevation_deg, node.boresight_azimuth_deg,
                              node.mech_tilt_deg, pattern=ctx.bs_pattern)
    if node.kind == "RIS":
        az_off = wrap_angle_deg(np.asarray(azimuth_deg, dtype=float) - node.boresight_azimuth_deg)
        el_off = np.asarray(elevation_deg, dtype=float) + node.mech_tilt_deg
        return element_pattern(az_off, el_off, ctx.element_pattern)
    # UE: two omni 0 dBi antennas with random orientation; with large-scale
    # only modeling one effective 0 dBi branch is simulated.
    g = np.zeros(np.shape(azimuth_deg))
    return g if g.ndim else 0.0


def link_gain(tx: NodePlacement, rx: NodePlacement, ctx: RadioContext,
              rng: np.random.Generator | None = None,
              hop_state: tuple | None = None) -> LinkGain:
    """Full large-scale budget of one TX-RX pair through wrap-around.

    LOS is sampled from its distance-dependent probability and shadowing is
    drawn once per link; pass ``hop_state=(los, shadow_db)`` to pin both, or
    an ``rng`` to draw from a caller-owned stream.
    """
    # Co-located endpoints fall through: uma_pathloss clamps d3d to 1 m
    # with a logged warning.
    disp = wrapped_displacement(tx.position, rx.position, ctx.layout)
    dz = rx.position[2] - tx.position[2]
    az, el, d2d, d3d = direction_angles(disp, dz)
    p_los = los_probability(d2d, min(tx.position[2], rx.position[2])
                            if rx.kind == "BS" else rx.position[2])
    if hop_state is not None:
        los, shadow = hop_state
    elif rng is not None:
        los = bool(rng.uniform() < p_los) if ctx.los_mode == "random" else (ctx.los_mode == "los")
        shadow = shadow_fading(rng, los, ctx.shadowing)
    else:
        raise ValueError("link_gain needs either an rng or a pinned hop_state")
    pl = uma_pathloss(d3d, d2d, ctx.fc_ghz, tx.position[2], rx.position[2], los)
    tx_gain = pattern_gain_for_node(tx, az, el, ctx)
    rx_gain = pattern_gain_for_node(rx, az + 180.0, -el, ctx)
    return LinkGain(los=los, pathloss_db=float(pl), shadow_db=float(shadow),
                    tx_gain_db=float(tx_gain), rx_gain_db=float(rx_gain))
