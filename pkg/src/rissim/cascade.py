"""BS -> RIS -> UE cascaded large-scale gain by near-field coherent
summation over the panel elements, combination with the direct link, and
RIS-UE pairing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import NodePlacement, wrapped_displacement
from .radio import (RadioContext, bs_sector_gain, direction_angles, element_pattern,
                    los_probability, uma_pathloss)
from .ris import RisPanel, conjugate_phase_indices, two_hop_phases
from .streams import TAG_RIS_UE, TAG_SITE_RIS


@dataclass(frozen=True)
class CascadedGain:
    """Coherent two-hop gain of one (BS, panel, UE) triple."""

    coherent_sum: complex
    power_gain: float            # linear; includes BS/UE pattern gains and shadowing
    distance_3d_m: float         # panel center to UE
    behind_panel: bool
    los_bs_ris: bool
    los_ris_ue: bool

    @property
    def power_db(self) -> float:
        return 10.0 * np.log10(self.power_gain) if self.power_gain > 0 else -np.inf


def coherent_power_sum(amplitudes, phases) -> float:
    """|sum a_e exp(j theta_e)|^2 for explicit per-element terms."""
    a = np.asarray(amplitudes, dtype=float)
    t = np.asarray(phases, dtype=float)
    return float(np.abs(np.sum(a * np.exp(1j * t))) ** 2)


def leg_source_to_elements(panel: RisPanel, src_position, ctx: RadioContext, los):
    """Amplitude and distance of the source->element leg.

    amplitude_e = sqrt(PL_lin(src->e)) * sqrt(g_element(incidence)) with the
    pathloss and pattern angle taken per element in exact near-field mode
    and at the panel center otherwise. Returns (amp (e,), dist (e,)); the
    distances are always exact per element (they carry the phase).
    """
    src = np.asarray(src_position, dtype=float)
    elems = panel.element_positions()
    center = panel.placement.position
    d_vec = src - elems
    d3d = np.linalg.norm(d_vec, axis=-1)
    if ctx.near_field_exact:
        d2d = np.hypot(d_vec[:, 0], d_vec[:, 1])
        pl = uma_pathloss(d3d, d2d, ctx.fc_ghz, src[2], elems[:, 2], los)
        az, el = panel.local_angles(src, origins=elems)
        g = element_pattern(az, el, panel.pattern)
    else:
        c_vec = src - center
        c2d = np.hypot(c_vec[0], c_vec[1])
        c3d = np.hypot(c2d, c_vec[2])
        pl = np.full(panel.n_elements,
                     uma_pathloss(c3d, c2d, ctx.fc_ghz, src[2], center[2], los))
        az, el = panel.local_angles(src)
        g = np.full(panel.n_elements, element_pattern(az, el, panel.pattern))
    return 10.0 ** ((g - pl) / 20.0), d3d


def leg_elements_to_points(panel: RisPanel, point_positions, ctx: RadioContext, los):
    """Amplitude and distance of the element->point leg.

    ``point_positions`` is (n, 3) and ``los`` a scalar or (n,) bool; returns
    (amp (e, n), dist (e, n)) with the same near/far-field convention as
    ``leg_source_to_elements``.
    """
    pts = np.atleast_2d(np.asarray(point_positions, dtype=float))
    elems = panel.element_positions()
    center = panel.placement.position
    d_vec = pts[None, :, :] - elems[:, None, :]
    d3d = np.linalg.norm(d_vec, axis=-1)
    los_arr = np.asarray(los)
    if ctx.near_field_exact:
        d2d = np.hypot(d_vec[..., 0], d_vec[..., 1])
        pl = uma_pathloss(d3d, d2d, ctx.fc_ghz, elems[:, 2][:, None],
                          pts[:, 2][None, :],
                          los_arr[None, :] if los_arr.ndim else los_arr)
        az, el = panel.local_angles(pts[None, :, :], origins=elems[:, None, :])
        g = element_pattern(az, el, panel.pattern)
    else:
        c_vec = pts - center
        c2d = np.hypot(c_vec[:, 0], c_vec[:, 1])
        c3d = np.hypot(c2d, c_vec[:, 2])
        pl = np.broadcast_to(uma_pathloss(c3d, c2d, ctx.fc_ghz, center[2],
                                          pts[:, 2], los_arr)[None, :], d3d.shape)
        az, el = panel.local_angles(pts)
        g = np.broadcast_to(element_pattern(az, el, panel.pattern)[None, :], d3d.shape)
    return 10.0 ** ((g - pl) / 20.0), d3d


def element_amplitudes_and_phases(panel: RisPanel, bs_position, ue_positions,
                                  ctx: RadioContext, los_bs_ris, los_ris_ue):
    """Per-element amplitude and propagation phase for wrap-resolved nodes.

    amplitude_e = sqrt(PL_lin(bs->e)) * |element response| * sqrt(PL_lin(e->ue)),
    phase_e = (2 pi / lambda)(d_bs,e + d_e,ue). In exact near-field mode the
    pathloss and the element-pattern angles are evaluated per element at its
    own position; otherwise the panel-center values are reused for speed
    (the phases always use exact per-element distances).

    ``ue_positions`` is (3,) or (n, 3); returns (amp, psi) with shape
    (n_elements,) or (n_elements, n).
    """
    single = np.asarray(ue_positions).ndim == 1
    amp1, d1 = leg_source_to_elements(panel, bs_position, ctx, los_bs_ris)
    amp2, d2 = leg_elements_to_points(panel, ue_positions, ctx, los_ris_ue)
    amp = amp1[:, None] * amp2
    psi = (2.0 * np.pi / panel.wavelength_m) * (d1[:, None] + d2)
    if single:
        return amp[:, 0], psi[:, 0]
    return amp, psi


def _bs_gain_toward(bs: NodePlacement, bs_eff_position, target_position, ctx: RadioContext):
    d = np.asarray(target_position, dtype=float) - np.asarray(bs_eff_position, dtype=float)
    az, el, _, _ = direction_angles(d[..., :2], d[..., 2])
    return bs_sector_gain(az, el, bs.boresight_azimuth_deg, bs.mech_tilt_deg,
                          pattern=ctx.bs_pattern)


def resolve_wrapped(position, reference, layout):
    """3D position of the wrap replica of ``position`` nearest ``reference``."""
    disp = wrapped_displacement(reference, position, layout)
    ref = np.asarray(reference, dtype=float)
    return np.array([ref[0] + disp[0], ref[1] + disp[1],
                     np.asarray(position, dtype=float)[2]])


def cascaded_gain(bs: NodePlacement, panel: RisPanel, ue: NodePlacement,
                  ctx: RadioContext, indices: np.ndarray | None = None,
                  hop_states: tuple | None = None) -> CascadedGain:
    """Cascaded large-scale gain of one (BS, panel, UE) triple.

    Geometry is wrap-resolved around the panel. ``indices`` (a commanded
    phase-index grid) defaults to the panel's current commanded state;
    failed elements always substitute their frozen index. ``hop_states``
    can pin ((los1, shadow1_db), (los2, shadow2_db)); otherwise both hops
    draw from their keyed per-link streams.
    """
    layout = ctx.layout
    center = panel.placement.position
    bs_eff = resolve_wrapped(bs.position, center, layout)
    ue_eff = resolve_wrapped(ue.position, center, layout)

    if hop_states is None:
        d2d1 = float(np.hypot(*(bs_eff[:2] - center[:2])))
        d2d2 = float(np.hypot(*(ue_eff[:2] - center[:2])))
        hop1 = ctx.hop_draw(TAG_SITE_RIS, (bs.sector_id // 3, panel.node_id),
                            los_probability(d2d1, center[2]))
        hop2 = ctx.hop_draw(TAG_RIS_UE, (panel.node_id, ue.node_id),
                            los_probability(d2d2, ue_eff[2]))
    else:
        hop1, hop2 = hop_states
    los1, sh1 = hop1
    los2, sh2 = hop2

    commanded = panel.phase_indices if indices is None else np.asarray(indices, dtype=np.int64)
    applied = np.where(panel.failed, panel.frozen_indices,
                       commanded.reshape(panel.n_rows, panel.n_cols)).reshape(-1)
    phases = applied * (2.0 * np.pi / panel.n_levels)

    amp, psi = element_amplitudes_and_phases(panel, bs_eff, ue_eff, ctx, los1, los2)
    total = complex(np.sum(amp * np.exp(1j * (psi + phases))))

    g_bs = float(_bs_gain_toward(bs, bs_eff, center, ctx))
    g_ue = 0.0
    scalars_db = g_bs + g_ue - float(sh1) - float(sh2)
    power = float(np.abs(total) ** 2) * 10.0 ** (scalars_db / 10.0)

    normal, _, _ = panel.local_axes()
    behind = bool(np.dot(ue_eff - center, normal) <= 0.0)
    return CascadedGain(
        coherent_sum=total,
        power_gain=power,
        distance_3d_m=float(np.linalg.norm(ue_eff - center)),
        behind_panel=behind,
        los_bs_ris=bool(los1),
        los_ris_ue=bool(los2),
    )


def combined_gain(direct_linear: float, cascaded_linear: float) -> float:
    """Incoherent power-domain combination of direct and cascaded links."""
    if direct_linear < 0 or cascaded_linear < 0:
        raise ValueError("link gains must be non-negative")
    return direct_linear + cascaded_linear


@dataclass(frozen=True)
class PairingResult:
    panel: RisPanel
    gain: CascadedGain
    indices: np.ndarray     # conjugate config used for the evaluation


def pair_ris(ue: NodePlacement, panels: list[RisPanel],
             bs_for_sector, direct_gain_linear: float, threshold_db: float,
             ctx: RadioContext) -> PairingResult | None:
    """Best candidate panel for a UE, or None if no panel clears the
    pairing criterion cascaded_dB >= direct_dB + threshold_dB.

    Each candidate is evaluated with its conjugate configuration toward
    this UE; ties go to the lowest panel id. ``bs_for_sector`` maps a
    sector id to its BS placement.
    """
    best: PairingResult | None = None
    for panel in sorted(panels, key=lambda p: p.node_id):
        bs = bs_for_sector[panel.sector_id] if not callable(bs_for_sector) \
            else bs_for_sector(panel.sector_id)
        center = panel.placement.position
        bs_eff = resolve_wrapped(bs.position, center, ctx.layout)
        ue_eff = resolve_wrapped(ue.position, center, ctx.layout)
        psi = two_hop_phases(panel, bs_eff, ue_eff)
        indices = conjugate_phase_indices(psi, panel.phase_bits).reshape(
            panel.n_rows, panel.n_cols)
        gain = cascaded_gain(bs, panel, ue, ctx, indices=indices)
        if best is None or gain.power_gain > best.gain.power_gain:
            best = PairingResult(panel=panel, gain=gain, indices=indices)
    if best is None:
        return None
    direct_db = 10.0 * np.log10(direct_gain_linear) if direct_gain_linear > 0 else -np.inf
    if best.gain.power_db >= direct_db + threshold_db:
        return best
    return None
