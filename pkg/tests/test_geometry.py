import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rissim.errors import ConfigurationError
from rissim.geometry import (MIN_BS_UE_2D_M, MIN_PANEL_SPACING_M, build_bs_placements,
                             build_layout, drop_ris_panels, drop_ues,
                             wrapped_displacement, wrapped_displacements)
from rissim.streams import TAG_RIS_DROP, TAG_UE_DROP, substream


def test_one_ring_counts(layout1):
    assert layout1.n_sites == 7
    assert layout1.n_sectors == 21
    assert layout1.isd_m == 500.0
    assert layout1.cell_radius_m == pytest.approx(500.0 / math.sqrt(3.0))


def test_zero_ring_degenerate(layout0):
    assert layout0.n_sites == 1
    assert layout0.n_sectors == 3
    assert layout0.wrap_shifts.shape == (1, 2)
    assert not layout0.wrap_shifts.any()


def test_wrap_set_contains_zero(layout1):
    norms = np.linalg.norm(layout1.wrap_shifts, axis=1)
    assert norms[0] == 0.0
    # cluster translations of a 7-site layout all have norm sqrt(7)*isd
    assert np.allclose(norms[1:], math.sqrt(7.0) * 500.0)


def test_every_site_has_six_neighbors_at_isd(layout1):
    # brute-force pairwise scan over all sites x all wrap shifts
    sites = layout1.site_positions
    for i in range(len(sites)):
        count = 0
        for j in range(len(sites)):
            for s in layout1.wrap_shifts:
                if i == j and not s.any():
                    continue
                d = np.linalg.norm(sites[j] + s - sites[i])
                if abs(d - 500.0) <= 1e-9:
                    count += 1
        assert count == 6


def test_two_ring_layout():
    lay = build_layout(2, 500.0)
    assert lay.n_sites == 19
    assert np.allclose(np.linalg.norm(lay.wrap_shifts[1:], axis=1),
                       math.sqrt(19.0) * 500.0)


def test_invalid_rings_rejected():
    with pytest.raises(ConfigurationError):
        build_layout(3, 500.0)
    with pytest.raises(ConfigurationError):
        build_layout(1, -5.0)


def test_wrapped_displacement_trivial(layout1):
    a = np.array([10.0, -20.0])
    assert np.allclose(wrapped_displacement(a, a, layout1), [0.0, 0.0])
    b = np.array([40.0, 10.0])
    # both points within the center cell: identity shift already minimal
    assert np.allclose(wrapped_displacement(a, b, layout1), b - a)


def test_wrapped_displacement_edge_pair_matches_exhaustive(layout1):
    a = np.array([-700.0, 0.0])
    b = np.array([700.0, 50.0])
    disp = wrapped_displacement(a, b, layout1)
    best = min((np.linalg.norm(b + s - a) for s in layout1.wrap_shifts))
    assert np.linalg.norm(disp) == pytest.approx(best)
    assert np.linalg.norm(disp) < np.linalg.norm(b - a)  # a shift was used


@settings(max_examples=200, deadline=None)
@given(st.floats(-900, 900), st.floats(-900, 900),
       st.floats(-900, 900), st.floats(-900, 900))
def test_wrapped_never_longer_than_unwrapped(ax, ay, bx, by):
    lay = build_layout(1, 500.0)
    a, b = np.array([ax, ay]), np.array([bx, by])
    d_wrap = np.linalg.norm(wrapped_displacement(a, b, lay))
    assert d_wrap <= np.linalg.norm(b - a) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-800, 800), st.floats(-800, 800),
       st.floats(-800, 800), st.floats(-800, 800))
def test_wrapped_antisymmetric_when_unique(ax, ay, bx, by):
    lay = build_layout(1, 500.0)
    a, b = np.array([ax, ay]), np.array([bx, by])
    dists = np.sort([np.linalg.norm(b + s - a) for s in lay.wrap_shifts])
    if dists[1] - dists[0] < 1e-6:   # minimizer not unique
        return
    fwd = wrapped_displacement(a, b, lay)
    bwd = wrapped_displacement(b, a, lay)
    assert np.allclose(fwd, -bwd, atol=1e-9)


def test_wrapped_displacements_batch_matches_scalar(layout1):
    rng = np.random.default_rng(7)
    a = rng.uniform(-800, 800, 2)
    pts = rng.uniform(-800, 800, (50, 2))
    batch = wrapped_displacements(a, pts, layout1)
    for i, p in enumerate(pts):
        assert np.allclose(batch[i], wrapped_displacement(a, p, layout1))


def test_drop_panels_cell_edge(layout1):
    panels = drop_ris_panels(layout1, 4, "cell-edge", substream(3, TAG_RIS_DROP))
    assert len(panels) == 84
    radius = layout1.cell_radius_m
    for p in panels:
        site = layout1.site_positions[p.sector_id // 3]
        r = np.linalg.norm(p.position[:2] - site)
        assert 0.9 * radius - 1e-9 <= r <= radius + 1e-9
        assert p.position[2] == 15.0
        assert p.mech_tilt_deg == 10.0
    xy = np.array([p.position[:2] for p in panels])
    for i in range(len(xy)):
        for j in range(i + 1, len(xy)):
            d = np.linalg.norm(wrapped_displacement(xy[i], xy[j], layout1))
            assert d >= MIN_PANEL_SPACING_M - 1e-9


def test_drop_panels_24_per_sector(layout1):
    panels = drop_ris_panels(layout1, 24, "cell-edge", substream(9, TAG_RIS_DROP))
    assert len(panels) == 504


def test_drop_panels_empty(layout1):
    assert drop_ris_panels(layout1, 0, "uniform", substream(1, TAG_RIS_DROP)) == []


def test_panels_face_serving_bs(layout1):
    panels = drop_ris_panels(layout1, 2, "uniform", substream(5, TAG_RIS_DROP))
    for p in panels:
        site = layout1.site_positions[p.sector_id // 3]
        to_bs = site - p.position[:2]
        az = math.degrees(math.atan2(to_bs[1], to_bs[0]))
        # incident azimuth on the BS-RIS link is 0 degrees in the panel frame
        diff = (az - p.boresight_azimuth_deg + 180.0) % 360.0 - 180.0
        assert abs(diff) < 1e-9


def test_drop_ues_counts_and_heights(layout1, layout0):
    ues = drop_ues(layout1, 50, "uniform", substream(2, TAG_UE_DROP))
    assert len(ues) == 1050
    assert all(u.position[2] == 1.5 for u in ues)
    ues0 = drop_ues(layout0, 1, "uniform", substream(2, TAG_UE_DROP))
    assert len(ues0) == 3
    assert sorted(u.sector_id for u in ues0) == [0, 1, 2]


def test_drop_ues_cell_edge_band(layout1):
    ues = drop_ues(layout1, 20, "cell-edge", substream(11, TAG_UE_DROP))
    radius = layout1.cell_radius_m
    for u in ues:
        site = layout1.site_positions[u.sector_id // 3]
        r = np.linalg.norm(u.position[:2] - site)
        assert 0.85 * radius - 1e-9 <= r <= 0.9 * radius + 1e-9


def test_drop_ues_min_bs_distance(layout1):
    ues = drop_ues(layout1, 100, "uniform", substream(13, TAG_UE_DROP))
    for u in ues:
        site = layout1.site_positions[u.sector_id // 3]
        assert np.linalg.norm(u.position[:2] - site) >= MIN_BS_UE_2D_M - 1e-9


def test_drops_are_reproducible(layout1):
    a = drop_ues(layout1, 10, "uniform", substream(42, TAG_UE_DROP))
    b = drop_ues(layout1, 10, "uniform", substream(42, TAG_UE_DROP))
    assert all(np.array_equal(x.position, y.position) for x, y in zip(a, b))
    pa = drop_ris_panels(layout1, 4, "cell-edge", substream(42, TAG_RIS_DROP))
    pb = drop_ris_panels(layout1, 4, "cell-edge", substream(42, TAG_RIS_DROP))
    assert all(np.array_equal(x.position, y.position) for x, y in zip(pa, pb))


def test_uniform_radial_density_proportional_to_r(layout0):
    # area-uniform sampling means r^2 is uniform between the bounds
    ues = drop_ues(layout0, 2000, "uniform", substream(21, TAG_UE_DROP))
    site = layout0.site_positions[0]
    radius = layout0.cell_radius_m
    r2 = np.array([np.linalg.norm(u.position[:2] - site) ** 2 for u in ues])
    lo, hi = MIN_BS_UE_2D_M ** 2, radius ** 2
    stat = stats.kstest((r2 - lo) / (hi - lo), "uniform")
    assert stat.pvalue > 1e-3


def test_ue_azimuths_stay_in_wedge(layout0):
    ues = drop_ues(layout0, 200, "uniform", substream(17, TAG_UE_DROP))
    for u in ues:
        az = math.degrees(math.atan2(u.position[1], u.position[0]))
        boresight = layout0.sector_azimuth_deg(u.sector_id)
        diff = abs((az - boresight + 180.0) % 360.0 - 180.0)
        assert diff <= 60.0 + 1e-9


def test_bs_placements(layout1):
    bss = build_bs_placements(layout1)
    assert len(bss) == 21
    assert all(b.position[2] == 25.0 for b in bss)
    assert [b.boresight_azimuth_deg for b in bss[:3]] == [0.0, 120.0, 240.0]
    assert all(b.mech_tilt_deg == 0.0 for b in bss)
