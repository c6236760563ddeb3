import hashlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from plot_results import (PlotInputError, PlotSpec, main, plot_cdfs, plot_heatmap,
                          read_cdf, read_heatmap)

FIXTURES = Path(__file__).parent / "fixtures"

CDF_FILES = sorted(FIXTURES.glob("cdf_sinr_*.csv"))


def _hash_tree(paths):
    return {p: hashlib.sha256(p.read_bytes()).hexdigest() for p in paths}


def test_fixture_inventory():
    assert len(CDF_FILES) == 7
    assert (FIXTURES / "heatmap.csv").exists()
    assert (FIXTURES / "placements.csv").exists()


class TestSpecValidation:
    def test_requires_inputs(self, tmp_path):
        with pytest.raises(PlotInputError, match="at least one"):
            PlotSpec(kind="cdf-overlay", inputs=[], output=tmp_path / "x.png")

    def test_rejects_duplicate_labels(self, tmp_path):
        with pytest.raises(PlotInputError, match="unique"):
            PlotSpec(kind="cdf-overlay",
                     inputs=[(CDF_FILES[0], "a"), (CDF_FILES[1], "a")],
                     output=tmp_path / "x.png")

    def test_rejects_unknown_kind(self, tmp_path):
        with pytest.raises(PlotInputError, match="kind"):
            PlotSpec(kind="scatter", inputs=[(CDF_FILES[0], "a")],
                     output=tmp_path / "x.png")


class TestReaders:
    def test_cdf_reader_monotone(self):
        values, pct = read_cdf(CDF_FILES[0])
        assert len(values) == len(pct) > 10
        assert all(b >= a for a, b in zip(pct, pct[1:]))

    def test_cdf_schema_mismatch_names_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("value,quantile\n1,0.5\n")
        with pytest.raises(PlotInputError, match="percentile"):
            read_cdf(bad)

    def test_empty_csv_is_explicit_error(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("value,percentile\n")
        with pytest.raises(PlotInputError, match="no data rows"):
            read_cdf(empty)

    def test_heatmap_grid_parsed(self):
        xs, ys, grid = read_heatmap(FIXTURES / "heatmap.csv")
        assert grid.shape == (len(ys), len(xs))

    def test_heatmap_irregular_grid_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x_m,y_m,gain_db\n0,0,1\n10,0,2\n0,10,3\n")
        with pytest.raises(PlotInputError, match="irregular grid"):
            read_heatmap(bad)


class TestCdfOverlay:
    def test_seven_curve_overlay(self, tmp_path):
        before = _hash_tree(CDF_FILES)
        spec = PlotSpec(kind="cdf-overlay",
                        inputs=[(p, p.stem.replace("cdf_sinr_", "")) for p in CDF_FILES],
                        output=tmp_path / "sinr_cdfs.png",
                        xlabel="SINR (dB)")
        out = plot_cdfs(spec)
        assert out.exists() and out.stat().st_size > 10_000
        assert _hash_tree(CDF_FILES) == before   # inputs untouched

    def test_single_curve(self, tmp_path):
        spec = PlotSpec(kind="cdf-overlay", inputs=[(CDF_FILES[0], "one")],
                        output=tmp_path / "one.png")
        assert plot_cdfs(spec).exists()

    def test_failed_plot_writes_no_image(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("value,percentile\n")
        spec = PlotSpec(kind="cdf-overlay", inputs=[(empty, "x")],
                        output=tmp_path / "never.png")
        with pytest.raises(PlotInputError):
            plot_cdfs(spec)
        assert not (tmp_path / "never.png").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        blobs = []
        for name in ("a.png", "b.png"):
            spec = PlotSpec(kind="cdf-overlay", inputs=[(CDF_FILES[0], "x")],
                            output=tmp_path / name)
            blobs.append(plot_cdfs(spec).read_bytes())
        assert blobs[0] == blobs[1]


class TestHeatmap:
    def test_map_with_markers(self, tmp_path):
        inputs = [FIXTURES / "heatmap.csv", FIXTURES / "placements.csv"]
        before = _hash_tree(inputs)
        spec = PlotSpec(kind="heatmap", inputs=[(inputs[0], "gain")],
                        output=tmp_path / "map.png")
        out = plot_heatmap(spec, placements=inputs[1])
        assert out.exists() and out.stat().st_size > 10_000
        assert _hash_tree(inputs) == before

    def test_all_zero_gains_render(self, tmp_path):
        flat = tmp_path / "flat.csv"
        rows = ["x_m,y_m,gain_db"]
        rows += [f"{x},{y},0" for y in (0, 10, 20) for x in (0, 10)]
        flat.write_text("\n".join(rows) + "\n")
        spec = PlotSpec(kind="heatmap", inputs=[(flat, "gain")],
                        output=tmp_path / "flat.png")
        assert plot_heatmap(spec).exists()

    def test_missing_placements_warns_and_omits_markers(self, tmp_path):
        spec = PlotSpec(kind="heatmap", inputs=[(FIXTURES / "heatmap.csv", "gain")],
                        output=tmp_path / "nomark.png")
        with pytest.warns(UserWarning, match="markers omitted"):
            out = plot_heatmap(spec, placements=tmp_path / "nope.csv")
        assert out.exists()


class TestCli:
    def test_cdf_overlay_command(self, tmp_path):
        args = ["--kind", "cdf-overlay", "--out", str(tmp_path / "o.png"),
                "--xlabel", "SINR (dB)"]
        for p in CDF_FILES:
            args += ["--in", f"{p}={p.stem.replace('cdf_sinr_', '')}"]
        assert main(args) == 0
        assert (tmp_path / "o.png").exists()

    def test_heatmap_command(self, tmp_path):
        assert main(["--kind", "heatmap",
                     "--in", f"{FIXTURES / 'heatmap.csv'}=gain",
                     "--placements", str(FIXTURES / "placements.csv"),
                     "--out", str(tmp_path / "m.png")]) == 0

    def test_bad_input_exits_two(self, tmp_path):
        assert main(["--kind", "cdf-overlay",
                     "--in", f"{tmp_path / 'missing.csv'}=x",
                     "--out", str(tmp_path / "x.png")]) == 2
