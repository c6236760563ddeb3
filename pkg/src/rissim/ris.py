"""RIS device model: element grid geometry, simplified element response,
discrete phase control, beamforming configuration, failure injection, and
radiation-pattern analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import NodePlacement
from .radio import RIS_ELEMENT_PATTERN, PatternParams, element_pattern, wrap_angle_deg

ELEMENT_SPACING_WAVELENGTHS = 0.4
GLOBAL_ROTATION_CANDIDATES = 16


@dataclass
class RisElementState:
    """Phase control state of a single element.

    The applied phase is 2*pi*index / 2^bits. A failed element ignores the
    commanded index and uses its frozen random index instead.
    """

    phase_index: int = 0
    failed: bool = False
    failed_phase_index: int = 0

    def applied_index(self) -> int:
        return self.failed_phase_index if self.failed else self.phase_index


@dataclass
class RisPanel:
    """Planar element grid with per-element phase indices and failure flags."""

    placement: NodePlacement
    n_rows: int                     # vertical count
    n_cols: int                     # horizontal count
    wavelength_m: float
    pattern: PatternParams = RIS_ELEMENT_PATTERN
    phase_bits: int = 2
    phase_indices: np.ndarray = field(default=None)   # (rows, cols) int
    failed: np.ndarray = field(default=None)          # (rows, cols) bool
    frozen_indices: np.ndarray = field(default=None)  # (rows, cols) int

    def __post_init__(self):
        shape = (self.n_rows, self.n_cols)
        if self.phase_indices is None:
            self.phase_indices = np.zeros(shape, dtype=np.int64)
        if self.failed is None:
            self.failed = np.zeros(shape, dtype=bool)
        if self.frozen_indices is None:
            self.frozen_indices = np.zeros(shape, dtype=np.int64)

    @property
    def node_id(self) -> int:
        return self.placement.node_id

    @property
    def sector_id(self) -> int:
        return self.placement.sector_id

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def spacing_m(self) -> float:
        return ELEMENT_SPACING_WAVELENGTHS * self.wavelength_m

    @property
    def n_levels(self) -> int:
        return 1 << self.phase_bits

    def local_axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(normal, horizontal, vertical) unit axes of the panel plane.

        The normal points along the boresight azimuth, depressed by the
        mechanical down-tilt; the grid spans the orthogonal plane.
        """
        a = np.deg2rad(self.placement.boresight_azimuth_deg)
        t = np.deg2rad(self.placement.mech_tilt_deg)
        normal = np.array([np.cos(t) * np.cos(a), np.cos(t) * np.sin(a), -np.sin(t)])
        horiz = np.array([-np.sin(a), np.cos(a), 0.0])
        vert = np.array([np.sin(t) * np.cos(a), np.sin(t) * np.sin(a), np.cos(t)])
        return normal, horiz, vert

    def element_positions(self) -> np.ndarray:
        """(n_elements, 3) positions, row-major over (row, col), grid centered
        on the placement position with exact 0.4-wavelength pitch."""
        _, horiz, vert = self.local_axes()
        r = np.arange(self.n_rows) - (self.n_rows - 1) / 2.0
        c = np.arange(self.n_cols) - (self.n_cols - 1) / 2.0
        offsets = (r[:, None, None] * vert + c[None, :, None] * horiz) * self.spacing_m
        return (self.placement.position + offsets).reshape(-1, 3)

    def local_angles(self, targets: np.ndarray, origins: np.ndarray | None = None):
        """Boresight offsets (az_deg, el_deg) of directions origin -> target.

        Azimuth offset is the wrapped azimuth difference from the panel
        boresight azimuth; elevation offset is the elevation plus the
        mechanical down-tilt (separable convention shared with the BS
        sector pattern). Shapes broadcast.
        """
        targets = np.asarray(targets, dtype=float)
        origins = self.placement.position if origins is None else np.asarray(origins, dtype=float)
        d = targets - origins
        az = np.degrees(np.arctan2(d[..., 1], d[..., 0]))
        el = np.degrees(np.arctan2(d[..., 2], np.hypot(d[..., 0], d[..., 1])))
        az_off = wrap_angle_deg(az - self.placement.boresight_azimuth_deg)
        el_off = el + self.placement.mech_tilt_deg
        return az_off, el_off

    def applied_indices(self) -> np.ndarray:
        """Commanded indices with failure overrides, flattened row-major."""
        return np.where(self.failed, self.frozen_indices, self.phase_indices).reshape(-1)

    def applied_phases(self) -> np.ndarray:
        return self.applied_indices() * (2.0 * np.pi / self.n_levels)

    def set_indices(self, indices: np.ndarray) -> None:
        self.phase_indices = np.asarray(indices, dtype=np.int64).reshape(self.n_rows, self.n_cols)

    def element_state(self, row: int, col: int) -> RisElementState:
        return RisElementState(
            phase_index=int(self.phase_indices[row, col]),
            failed=bool(self.failed[row, col]),
            failed_phase_index=int(self.frozen_indices[row, col]),
        )


def make_panel(placement: NodePlacement, grid: int, wavelength_m: float,
               phase_bits: int = 2,
               pattern: PatternParams = RIS_ELEMENT_PATTERN) -> RisPanel:
    return RisPanel(placement=placement, n_rows=grid, n_cols=grid,
                    wavelength_m=wavelength_m, pattern=pattern, phase_bits=phase_bits)


def panel_side_lengths_m(panel: RisPanel) -> tuple[float, float]:
    """(horizontal, vertical) side lengths counting one cell per element."""
    return panel.n_cols * panel.spacing_m, panel.n_rows * panel.spacing_m


def panel_area_m2(panel: RisPanel) -> float:
    w, h = panel_side_lengths_m(panel)
    return w * h


def rayleigh_distance(panel: RisPanel, fc_ghz: float | None = None) -> float:
    """Far-field boundary 2 D^2 / lambda with D the panel diagonal."""
    lam = panel.wavelength_m if fc_ghz is None else 299_792_458.0 / (fc_ghz * 1e9)
    spacing = ELEMENT_SPACING_WAVELENGTHS * lam
    diag = spacing * float(np.hypot(panel.n_cols, panel.n_rows))
    return 2.0 * diag * diag / lam


def quantize_phase(target_rad: float, bits: int) -> int:
    """Index of the nearest level 2*pi*k/2^bits to target mod 2*pi.

    Exact midpoints round to the lower index.
    """
    if bits < 1:
        raise ConfigurationError(f"phase bits must be >= 1, got {bits}")
    levels = 1 << bits
    step = 2.0 * np.pi / levels
    x = np.mod(np.asarray(target_rad, dtype=float), 2.0 * np.pi) / step
    k = np.floor(x + 0.5)
    k = np.where(k - x == 0.5, k - 1.0, k)
    idx = np.mod(k.astype(np.int64), levels)
    return idx if idx.ndim else int(idx)


def element_response(incident: tuple, reflect: tuple, state: RisElementState,
                     pattern: PatternParams = RIS_ELEMENT_PATTERN,
                     phase_bits: int = 2) -> complex:
    """Complex response of one element for given local-frame directions.

    ``incident`` and ``reflect`` are (azimuth_offset_deg, elevation_offset_deg)
    pairs in the panel frame. The amplitude is the product of the square
    roots of the two pattern gains in linear power (pure phase tuning: no
    amplitude control); the phase is the applied element phase.
    """
    g_in = element_pattern(incident[0], incident[1], pattern)
    g_out = element_pattern(reflect[0], reflect[1], pattern)
    amplitude = 10.0 ** ((g_in + g_out) / 20.0)
    phase = state.applied_index() * (2.0 * np.pi / (1 << phase_bits))
    return complex(amplitude * np.exp(1j * phase))


def two_hop_phases(panel: RisPanel, bs_position, ue_positions) -> np.ndarray:
    """Propagation phase (2*pi/lambda)(|bs-e| + |e-ue|) per element.

    ``ue_positions`` may be (3,) or (n, 3); result is (n_elements,) or
    (n_elements, n). Positions must already be wrap-resolved.
    """
    elems = panel.element_positions()
    k = 2.0 * np.pi / panel.wavelength_m
    d1 = np.linalg.norm(np.asarray(bs_position, dtype=float) - elems, axis=-1)
    ue = np.atleast_2d(np.asarray(ue_positions, dtype=float))
    d2 = np.linalg.norm(elems[:, None, :] - ue[None, :, :], axis=-1)
    psi = k * (d1[:, None] + d2)
    return psi[:, 0] if np.asarray(ue_positions).ndim == 1 else psi


def _phasor_table(levels: int) -> np.ndarray:
    return np.exp(1j * 2.0 * np.pi * np.arange(levels) / levels)


def _quantize_array(target: np.ndarray, levels: int) -> np.ndarray:
    step = 2.0 * np.pi / levels
    x = np.mod(target, 2.0 * np.pi) / step
    k = np.floor(x + 0.5)
    k = np.where(k - x == 0.5, k - 1.0, k)
    return np.mod(k.astype(np.int64), levels)


def conjugate_phase_indices(psi: np.ndarray, bits: int,
                            weights: np.ndarray | None = None,
                            n_offsets: int = GLOBAL_ROTATION_CANDIDATES) -> np.ndarray:
    """Quantized conjugate of the propagation phases ``psi``.

    Each element's target phase is -psi plus a global rotation c scanned
    over ``n_offsets`` points of [0, step): per-element nearest-level
    rounding alone is not globally optimal for discrete phases, so the best
    offset by coherent |sum w exp(j(psi + phase))| is kept (ties to the
    lowest candidate). The returned grid is canonicalized so its first
    element has index 0 (a global index shift never changes the power).
    ``psi`` may be (n_elements,) or (n_elements, n) for a batch of users.
    """
    levels = 1 << bits
    step = 2.0 * np.pi / levels
    psi2d = psi[:, None] if psi.ndim == 1 else psi
    w = np.ones(psi2d.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    w2d = w[:, None] if w.ndim == 1 else w
    base = np.exp(1j * psi2d) * w2d
    table = _phasor_table(levels)
    best_power = np.full(psi2d.shape[1], -1.0)
    best_idx = np.zeros(psi2d.shape, dtype=np.int64)
    for m in range(n_offsets):
        c = m * step / n_offsets
        idx = _quantize_array(-psi2d + c, levels)
        power = np.abs(np.sum(base * table[idx], axis=0)) ** 2
        better = power > best_power + 1e-12 * np.maximum(best_power, 1.0)
        if np.any(better):
            best_power = np.where(better, power, best_power)
            best_idx[:, better] = idx[:, better]
    best_idx = np.mod(best_idx - best_idx[0, :], levels)
    return best_idx[:, 0] if psi.ndim == 1 else best_idx


def conjugate_config(panel: RisPanel, bs_position, ue_position,
                     weights: np.ndarray | None = None) -> np.ndarray:
    """Phase-index grid that coherently aligns the two-hop path to one UE.

    Exact per-element near-field distances are used (no planar-wave
    approximation). Returns a (rows, cols) index grid.
    """
    psi = two_hop_phases(panel, bs_position, ue_position)
    idx = conjugate_phase_indices(psi, panel.phase_bits, weights=weights)
    return idx.reshape(panel.n_rows, panel.n_cols)


def coherent_metric(panel: RisPanel, bs_position, ue_position,
                    indices: np.ndarray,
                    weights: np.ndarray | None = None) -> float:
    """|sum w exp(j(psi + applied))|^2 for a candidate index grid.

    This is the selection metric shared by ``conjugate_config`` and
    ``sweep_codebook``; the cascaded-channel module applies the full link
    budget on top of the same coherent sum.
    """
    psi = two_hop_phases(panel, bs_position, ue_position)
    w = np.ones(panel.n_elements) if weights is None else np.asarray(weights, dtype=float)
    phases = np.asarray(indices, dtype=np.int64).reshape(-1) * (2.0 * np.pi / panel.n_levels)
    return float(np.abs(np.sum(w * np.exp(1j * (psi + phases)))) ** 2)


def sweep_codebook(panel: RisPanel, bs_position, ue_position,
                   codebook: list[np.ndarray],
                   weights: np.ndarray | None = None) -> int:
    """Index of the codebook entry maximizing the coherent metric.

    Ties resolve to the lowest entry index.
    """
    if not codebook:
        raise ConfigurationError("codebook must contain at least one entry")
    powers = [coherent_metric(panel, bs_position, ue_position, entry, weights)
              for entry in codebook]
    return int(np.argmax(powers))


def steering_config(panel: RisPanel, bs_position, az_off_deg: float,
                    el_off_deg: float) -> np.ndarray:
    """Far-field codebook entry steering toward a local-frame direction."""
    normal, horiz, vert = panel.local_axes()
    a = np.deg2rad(az_off_deg)
    e = np.deg2rad(el_off_deg)
    u_dir = (np.cos(e) * np.cos(a) * normal + np.cos(e) * np.sin(a) * horiz
             + np.sin(e) * vert)
    to_bs = np.asarray(bs_position, dtype=float) - panel.placement.position
    u_bs = to_bs / np.linalg.norm(to_bs)
    delta = panel.element_positions() - panel.placement.position
    k = 2.0 * np.pi / panel.wavelength_m
    psi = -k * delta @ (u_bs + u_dir)
    idx = conjugate_phase_indices(psi, panel.phase_bits)
    return idx.reshape(panel.n_rows, panel.n_cols)


def estimated_hpbw_deg(panel: RisPanel) -> float:
    """Uniform-aperture half-power beamwidth estimate of the larger cut."""
    n = max(panel.n_rows, panel.n_cols)
    return float(np.degrees(0.886 / (n * ELEMENT_SPACING_WAVELENGTHS)))


def default_codebook(panel: RisPanel, bs_position,
                     az_range_deg: tuple[float, float] = (-60.0, 60.0),
                     el_range_deg: tuple[float, float] = (-30.0, 10.0),
                     max_entries: int = 1024) -> list[np.ndarray]:
    """Steering grid over the panel's front half-space, step half the HPBW,
    coarsened uniformly if the grid would exceed ``max_entries``."""
    step = estimated_hpbw_deg(panel) / 2.0
    while True:
        az = np.arange(az_range_deg[0], az_range_deg[1] + step / 2, step)
        el = np.arange(el_range_deg[0], el_range_deg[1] + step / 2, step)
        if len(az) * len(el) <= max_entries:
            break
        step *= 1.5
    return [steering_config(panel, bs_position, a, e) for e in el for a in az]


def inject_failures(panel: RisPanel, rate: float, rng: np.random.Generator) -> None:
    """Mark each element failed with probability ``rate`` and freeze failed
    elements to uniformly random phase indices for the rest of the drop."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigurationError(f"failure rate must be in [0, 1], got {rate}")
    shape = (panel.n_rows, panel.n_cols)
    panel.failed = rng.random(shape) < rate
    panel.frozen_indices = rng.integers(0, panel.n_levels, size=shape, dtype=np.int64)


@dataclass(frozen=True)
class BeamPattern:
    """Far-field reflected power pattern over one observation cut."""

    angles_deg: np.ndarray
    power_db: np.ndarray            # normalized to 0 dB peak
    peak_angle_deg: float
    hpbw_deg: float
    sidelobe_margin_db: float       # peak minus highest sidelobe
    peak_power_linear: float        # unnormalized |sum|^2 at the peak


def _hpbw_from_cut(angles: np.ndarray, power_db: np.ndarray, peak: int) -> float:
    def crossing(direction: int) -> float:
        i = peak
        while 0 <= i + direction < len(power_db) and power_db[i + direction] > -3.0:
            i += direction
        j = i + direction
        if j < 0 or j >= len(power_db):
            return angles[i]
        # linear interpolation to the -3 dB level
        f = (power_db[i] - (-3.0)) / (power_db[i] - power_db[j])
        return angles[i] + f * (angles[j] - angles[i])

    return float(abs(crossing(+1) - crossing(-1)))


def _sidelobe_margin(power_db: np.ndarray, peak: int) -> float:
    def first_null(direction: int) -> int:
        i = peak
        while 0 <= i + direction < len(power_db) and power_db[i + direction] <= power_db[i]:
            i += direction
        return i

    lo, hi = first_null(-1), first_null(+1)
    outside = np.concatenate([power_db[:lo + 1], power_db[hi:]])
    if len(outside) == 0:
        return float("inf")
    return float(power_db[peak] - np.max(outside))


def panel_beam_pattern(panel: RisPanel, indices: np.ndarray | None,
                       incident_local_deg: tuple,
                       obs_azimuths_deg: np.ndarray,
                       obs_elevation_deg: float = 0.0) -> BeamPattern:
    """Reflected far-field power over an azimuth cut in the panel frame.

    The incident wave and all observation directions are plane waves. The
    per-element amplitudes come from the element pattern on both legs and
    the geometric phase is the planar two-hop term, consistent in sign with
    the near-field propagation phases.
    """
    normal, horiz, vert = panel.local_axes()

    def unit(az_deg, el_deg):
        a, e = np.deg2rad(az_deg), np.deg2rad(el_deg)
        return (np.cos(e)[..., None] * np.cos(a)[..., None] * normal
                + np.cos(e)[..., None] * np.sin(a)[..., None] * horiz
                + np.sin(e)[..., None] * vert)

    obs_az = np.asarray(obs_azimuths_deg, dtype=float)
    u_in = unit(np.asarray(incident_local_deg[0]), np.asarray(incident_local_deg[1]))
    u_obs = unit(obs_az, np.full_like(obs_az, obs_elevation_deg))
    if indices is None:
        applied = panel.applied_phases()
    else:
        applied = (np.where(panel.failed, panel.frozen_indices,
                            np.asarray(indices, dtype=np.int64)).reshape(-1)
                   * (2.0 * np.pi / panel.n_levels))
    delta = panel.element_positions() - panel.placement.position
    k = 2.0 * np.pi / panel.wavelength_m
    geo = -k * (delta @ (u_in + u_obs).T)          # (elements, angles)
    field_sum = np.einsum("e,ea->a", np.exp(1j * applied), np.exp(1j * geo))
    g_in = element_pattern(incident_local_deg[0], incident_local_deg[1], panel.pattern)
    g_obs = element_pattern(obs_az, obs_elevation_deg, panel.pattern)
    amp = 10.0 ** ((g_in + g_obs) / 20.0)
    power = np.abs(amp * field_sum) ** 2
    peak = int(np.argmax(power))
    power_db = 10.0 * np.log10(np.maximum(power, 1e-300) / power[peak])
    return BeamPattern(
        angles_deg=obs_az,
        power_db=power_db,
        peak_angle_deg=float(obs_az[peak]),
        hpbw_deg=_hpbw_from_cut(obs_az, power_db, peak),
        sidelobe_margin_db=_sidelobe_margin(power_db, peak),
        peak_power_linear=float(power[peak]),
    )
