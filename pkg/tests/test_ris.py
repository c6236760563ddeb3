import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rissim.errors import ConfigurationError
from rissim.ris import (RisElementState, RisPanel, conjugate_config,
                        conjugate_phase_indices, coherent_metric, default_codebook,
                        element_response, estimated_hpbw_deg, inject_failures,
                        make_panel, panel_area_m2, panel_beam_pattern, quantize_phase,
                        rayleigh_distance, steering_config, sweep_codebook,
                        two_hop_phases)
from rissim.streams import TAG_FAILURE, substream

from conftest import make_node

WAVELENGTH = 299_792_458.0 / 2.6e9


def panel_at_origin(grid_rows, grid_cols=None, bits=2, az=0.0, tilt=0.0):
    node = make_node(0.0, 0.0, 15.0, kind="RIS", az=az, tilt=tilt)
    return RisPanel(placement=node, n_rows=grid_rows,
                    n_cols=grid_cols if grid_cols is not None else grid_rows,
                    wavelength_m=WAVELENGTH, phase_bits=bits)


class TestClosedFormGeometry:
    def test_element_grid_pitch(self):
        panel = panel_at_origin(4, az=35.0, tilt=10.0)
        pos = panel.element_positions().reshape(4, 4, 3)
        d = panel.spacing_m
        for r in range(4):
            for c in range(3):
                assert np.linalg.norm(pos[r, c + 1] - pos[r, c]) == pytest.approx(d, rel=1e-12)
        for r in range(3):
            for c in range(4):
                assert np.linalg.norm(pos[r + 1, c] - pos[r, c]) == pytest.approx(d, rel=1e-12)
        # planar: all points satisfy normal . (x - center) = 0
        normal, _, _ = panel.local_axes()
        rel = panel.element_positions() - panel.placement.position
        assert np.max(np.abs(rel @ normal)) < 1e-9

    def test_areas(self):
        assert panel_area_m2(panel_at_origin(16)) == pytest.approx(0.545, rel=0.01)
        assert panel_area_m2(panel_at_origin(40)) == pytest.approx(3.41, rel=0.01)
        assert panel_area_m2(panel_at_origin(16)) == pytest.approx(
            (16 * 0.4 * WAVELENGTH) ** 2, rel=1e-12)

    def test_rayleigh_distances(self):
        assert rayleigh_distance(panel_at_origin(16)) == pytest.approx(18.9, rel=0.02)
        assert rayleigh_distance(panel_at_origin(40)) == pytest.approx(118.1, rel=0.02)
        # single element: 2 (sqrt(2) * 0.4 lambda)^2 / lambda
        d = rayleigh_distance(panel_at_origin(1))
        assert d == pytest.approx(2 * (math.sqrt(2) * 0.4 * WAVELENGTH) ** 2 / WAVELENGTH,
                                  rel=1e-12)

    def test_aperture_diagonal_forty(self):
        panel = panel_at_origin(40)
        diag = panel.spacing_m * math.hypot(40, 40)
        assert diag == pytest.approx(2.6, abs=0.05)


class TestQuantizePhase:
    def test_near_zero(self):
        assert quantize_phase(0.3, 2) == 0

    def test_nearest_level(self):
        assert quantize_phase(math.pi / 3, 2) == 1

    def test_midpoint_rounds_down(self):
        assert quantize_phase(math.pi / 4, 2) == 0
        assert quantize_phase(3 * math.pi / 4, 2) == 1

    def test_wraps_to_zero(self):
        assert quantize_phase(2 * math.pi - 0.01, 2) == 0
        assert quantize_phase(-0.01, 2) == 0

    def test_rejects_zero_bits(self):
        with pytest.raises(ConfigurationError):
            quantize_phase(0.1, 0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50.0, 50.0), st.integers(1, 8))
    def test_index_in_range_and_error_bounded(self, target, bits):
        idx = quantize_phase(target, bits)
        levels = 1 << bits
        assert 0 <= idx < levels
        step = 2 * math.pi / levels
        err = (idx * step - target) % (2 * math.pi)
        err = min(err, 2 * math.pi - err)
        assert err <= step / 2 + 1e-9


class TestElementResponse:
    def test_double_boresight_amplitude(self):
        r = element_response((0.0, 0.0), (0.0, 0.0), RisElementState(0))
        assert abs(r) == pytest.approx(10 ** 0.5, rel=1e-12)   # 5+5 dB two-way
        assert np.angle(r) == pytest.approx(0.0)

    def test_phase_index_two_is_pi(self):
        r = element_response((0.0, 0.0), (0.0, 0.0), RisElementState(2))
        assert abs(r) == pytest.approx(10 ** 0.5, rel=1e-12)
        assert np.angle(r) == pytest.approx(math.pi)

    def test_oblique_incidence_scales_amplitude(self):
        r0 = element_response((0.0, 0.0), (0.0, 0.0), RisElementState(0))
        r = element_response((65.0, 0.0), (0.0, 0.0), RisElementState(0))
        assert abs(r) / abs(r0) == pytest.approx(10 ** (-12 / 20), rel=1e-12)

    def test_failed_element_uses_frozen_index(self):
        state = RisElementState(phase_index=0, failed=True, failed_phase_index=3)
        r = element_response((0.0, 0.0), (0.0, 0.0), state)
        assert np.angle(r) == pytest.approx(3 * math.pi / 2 - 2 * math.pi)

    def test_magnitude_independent_of_phase_index(self):
        mags = [abs(element_response((20.0, -5.0), (-30.0, 10.0), RisElementState(i)))
                for i in range(4)]
        assert max(mags) - min(mags) < 1e-15


class TestConjugateConfig:
    def test_single_element_returns_zero(self):
        panel = panel_at_origin(1)
        idx = conjugate_config(panel, [200.0, 40.0, 25.0], [30.0, -20.0, 1.5])
        assert idx.shape == (1, 1)
        assert idx[0, 0] == 0

    @pytest.mark.parametrize("seed", range(12))
    def test_two_element_exhaustive_optimality(self, seed):
        rng = np.random.default_rng(seed)
        panel = panel_at_origin(1, 2)
        bs = np.append(rng.uniform(50, 300, 2), 25.0)
        ue = np.append(rng.uniform(-80, 80, 2), 1.5)
        chosen = conjugate_config(panel, bs, ue)
        got = coherent_metric(panel, bs, ue, chosen)
        best = max(coherent_metric(panel, bs, ue, np.array(c).reshape(1, 2))
                   for c in itertools.product(range(4), repeat=2))
        assert got == pytest.approx(best, rel=1e-12)

    def test_far_field_boresight_symmetry(self):
        panel = panel_at_origin(3)
        bs = np.array([5000.0, 0.0, 15.0])
        ue = np.array([8000.0, 0.0, 15.0])
        idx = conjugate_config(panel, bs, ue)
        assert np.array_equal(idx, idx[::-1, ::-1])

    def test_canonical_first_element_zero(self):
        panel = panel_at_origin(3)
        idx = conjugate_config(panel, [150.0, 60.0, 25.0], [40.0, -10.0, 1.5])
        assert idx.reshape(-1)[0] == 0

    @pytest.mark.parametrize("seed", range(6))
    def test_quantized_at_least_half_of_unquantized(self, seed):
        rng = np.random.default_rng(100 + seed)
        panel = panel_at_origin(8)
        bs = np.append(rng.uniform(60, 280, 2), 25.0)
        ue = np.append(rng.uniform(-60, 60, 2), 1.5)
        idx = conjugate_config(panel, bs, ue)
        got = coherent_metric(panel, bs, ue, idx)
        unquantized = float(panel.n_elements) ** 2   # perfectly aligned unit weights
        assert got >= 0.5 * unquantized

    def test_monotone_in_bits(self):
        node = make_node(0.0, 0.0, 15.0, kind="RIS")
        bs = np.array([150.0, 70.0, 25.0])
        ue = np.array([35.0, -25.0, 1.5])
        last = -1.0
        for bits in range(1, 11):
            panel = RisPanel(placement=node, n_rows=2, n_cols=2,
                             wavelength_m=WAVELENGTH, phase_bits=bits)
            idx = conjugate_config(panel, bs, ue)
            power = coherent_metric(panel, bs, ue, idx)
            assert power >= last - 1e-9
            last = power
        assert last == pytest.approx(16.0, rel=1e-4)   # unquantized optimum

    def test_average_quantization_loss(self):
        rng = np.random.default_rng(2024)
        targets = rng.uniform(0.0, 2 * math.pi, 10_000)
        idx = np.array([quantize_phase(t, 2) for t in targets])
        err = idx * (math.pi / 2) - targets
        loss_db = 10 * math.log10(abs(np.mean(np.exp(1j * err))) ** 2)
        assert loss_db == pytest.approx(-0.912, abs=0.05)


class TestSweepCodebook:
    def test_single_entry(self):
        panel = panel_at_origin(2)
        entry = np.zeros((2, 2), dtype=int)
        assert sweep_codebook(panel, [100, 0, 25], [30, 10, 1.5], [entry]) == 0

    def test_empty_codebook_rejected(self):
        panel = panel_at_origin(2)
        with pytest.raises(ConfigurationError):
            sweep_codebook(panel, [100, 0, 25], [30, 10, 1.5], [])

    def test_superset_containing_conjugate_selects_it(self):
        panel = panel_at_origin(4)
        bs = np.array([180.0, 20.0, 25.0])
        ue = np.array([28.0, 14.0, 1.5])
        conj = conjugate_config(panel, bs, ue)
        book = [steering_config(panel, bs, a, -10.0) for a in (-40.0, 0.0, 40.0)]
        book.append(conj)
        choice = sweep_codebook(panel, bs, ue, book)
        powers = [coherent_metric(panel, bs, ue, e) for e in book]
        assert powers[choice] == max(powers)
        assert choice == 3   # near-field conjugate beats far-field steering here

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bruteforce_ordering(self, seed):
        rng = np.random.default_rng(seed)
        panel = panel_at_origin(1, 2)
        bs = np.append(rng.uniform(60, 250, 2), 25.0)
        ue = np.append(rng.uniform(-70, 70, 2), 1.5)
        book = [np.array([[rng.integers(0, 4), rng.integers(0, 4)]]) for _ in range(8)]
        choice = sweep_codebook(panel, bs, ue, book)
        powers = [coherent_metric(panel, bs, ue, e) for e in book]
        assert choice == int(np.argmax(powers))

    def test_default_codebook_bounded(self):
        panel = panel_at_origin(16)
        book = default_codebook(panel, [250.0, 0.0, 25.0], max_entries=64)
        assert 0 < len(book) <= 64


class TestInjectFailures:
    def test_rate_zero_is_noop(self):
        panel = panel_at_origin(8)
        panel.set_indices(np.arange(64).reshape(8, 8) % 4)
        before = panel.applied_indices().copy()
        inject_failures(panel, 0.0, substream(1, TAG_FAILURE, 0))
        assert not panel.failed.any()
        assert np.array_equal(panel.applied_indices(), before)

    def test_rate_one_fails_all(self):
        panel = panel_at_origin(8)
        inject_failures(panel, 1.0, substream(1, TAG_FAILURE, 0))
        assert panel.failed.all()

    def test_binomial_count_forty_grid(self):
        panel = panel_at_origin(40)
        inject_failures(panel, 0.1, substream(77, TAG_FAILURE, 0))
        count = int(panel.failed.sum())
        assert 120 <= count <= 200   # binomial(1600, 0.1) tail bound

    def test_failed_elements_ignore_reconfiguration(self):
        panel = panel_at_origin(4)
        inject_failures(panel, 0.5, substream(3, TAG_FAILURE, 0))
        frozen = panel.applied_indices().reshape(4, 4)
        panel.set_indices((panel.phase_indices + 1) % 4)
        after = panel.applied_indices().reshape(4, 4)
        assert np.array_equal(frozen[panel.failed], after[panel.failed])
        assert not np.array_equal(frozen[~panel.failed], after[~panel.failed])


class TestBeamPattern:
    def test_sixteen_grid_boresight_hpbw(self):
        panel = panel_at_origin(16)
        angles = np.linspace(-90.0, 90.0, 7201)
        bp = panel_beam_pattern(panel, np.zeros((16, 16), dtype=int), (0.0, 0.0), angles)
        assert bp.hpbw_deg == pytest.approx(7.4, abs=1.5)
        assert abs(bp.peak_angle_deg) <= angles[1] - angles[0]

    def test_forty_grid_boresight_hpbw(self):
        panel = panel_at_origin(40)
        angles = np.linspace(-90.0, 90.0, 7201)
        bp = panel_beam_pattern(panel, np.zeros((40, 40), dtype=int), (0.0, 0.0), angles)
        assert bp.hpbw_deg == pytest.approx(2.6, abs=1.0)

    def test_coherent_peak_is_n_squared(self):
        panel = panel_at_origin(8)
        angles = np.linspace(-90.0, 90.0, 3601)
        bp = panel_beam_pattern(panel, np.zeros((8, 8), dtype=int), (0.0, 0.0), angles)
        single = panel_at_origin(1)
        bp1 = panel_beam_pattern(single, np.zeros((1, 1), dtype=int), (0.0, 0.0), angles)
        assert bp.peak_power_linear == pytest.approx(64 ** 2 * bp1.peak_power_linear,
                                                     rel=1e-12)

    def test_steered_peak_lands_on_target(self):
        panel = panel_at_origin(16)
        steer = steering_config(panel, [400.0, 0.0, 15.0], 20.0, 0.0)
        angles = np.linspace(-90.0, 90.0, 3601)
        bp = panel_beam_pattern(panel, steer, (0.0, 0.0), angles)
        assert bp.peak_angle_deg == pytest.approx(20.0, abs=1.0)

    def test_pattern_with_failures_keeps_peak_direction(self):
        panel = panel_at_origin(16)
        inject_failures(panel, 0.1, substream(5, TAG_FAILURE, 0))
        angles = np.linspace(-90.0, 90.0, 3601)
        step = angles[1] - angles[0]
        bp = panel_beam_pattern(panel, np.zeros((16, 16), dtype=int), (0.0, 0.0), angles)
        assert abs(bp.peak_angle_deg) <= step + 1e-9
        assert bp.sidelobe_margin_db >= 7.0

    def test_estimated_hpbw_matches_measured(self):
        panel = panel_at_origin(16)
        angles = np.linspace(-90.0, 90.0, 7201)
        bp = panel_beam_pattern(panel, np.zeros((16, 16), dtype=int), (0.0, 0.0), angles)
        assert estimated_hpbw_deg(panel) == pytest.approx(bp.hpbw_deg, rel=0.1)


def test_two_hop_phase_shapes():
    panel = panel_at_origin(3)
    bs = np.array([100.0, 0.0, 25.0])
    single = two_hop_phases(panel, bs, np.array([20.0, 5.0, 1.5]))
    batch = two_hop_phases(panel, bs, np.array([[20.0, 5.0, 1.5], [25.0, -5.0, 1.5]]))
    assert single.shape == (9,)
    assert batch.shape == (9, 2)
    assert np.allclose(batch[:, 0], single)


def test_conjugate_batch_matches_single():
    panel = panel_at_origin(4)
    bs = np.array([220.0, -30.0, 25.0])
    ues = np.array([[40.0, 10.0, 1.5], [-20.0, 35.0, 1.5], [15.0, -50.0, 1.5]])
    psi = two_hop_phases(panel, bs, ues)
    batch = conjugate_phase_indices(psi, 2)
    for j in range(3):
        single = conjugate_config(panel, bs, ues[j])
        assert np.array_equal(batch[:, j].reshape(4, 4), single)
