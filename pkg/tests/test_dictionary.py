import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from dictse.dictionary import (
    ColumnProvenance,
    SourceSpectrum,
    build_dictionary,
    detector_response,
    filter_response,
    read_dictionary_csv,
    read_source_csv,
    table2_default_dictionary,
    thickness_range,
    write_dictionary_csv,
)
from dictse.errors import DegenerateColumn, GridMismatch, NegativeThickness, NonPositiveThickness
from dictse.materials import EnergyGrid


class TestFilter:
    def test_zero_thickness(self, table):
        np.testing.assert_array_equal(filter_response(table["Al"], 0.0).values, 1.0)

    def test_half_transmission(self):
        r = filter_response([1.0, 2.0], 0.693147)
        assert r.values[0] == pytest.approx(0.5, abs=1e-6)
        assert math.exp(-math.log(2)) == pytest.approx(0.5)

    def test_doubling_squares(self, table):
        a = filter_response(table["Cu"], 0.2).values
        b = filter_response(table["Cu"], 0.4).values
        np.testing.assert_allclose(b, a * a, rtol=1e-12)

    def test_negative(self, table):
        with pytest.raises(NegativeThickness):
            filter_response(table["Al"], -0.1)


class TestDetector:
    def test_total_absorption(self, grid):
        mu = np.full(grid.n_bins, 1e6)
        np.testing.assert_array_equal(detector_response(mu, 1.0, False).values, 1.0)
        np.testing.assert_allclose(detector_response(mu, 1.0, True, grid).values, grid.centers)

    def test_half_absorbed(self):
        r = detector_response([10.0, 10.0], 0.0693147, energy_weighted=False)
        assert r.values[0] == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("d", [0.0, -1.0])
    def test_non_positive(self, table, d):
        with pytest.raises(NonPositiveThickness):
            detector_response(table["LuAG"], d, False)

    @given(st.floats(0.001, 0.5), st.floats(0.001, 0.5))
    def test_monotone_in_thickness(self, d1, d2):
        g = EnergyGrid.uniform(10, 100, 10)
        mu = 300000 * g.centers ** -3 + 1.0
        lo, hi = sorted((d1, d2))
        assert np.all(detector_response(mu, hi, True, g).values >= detector_response(mu, lo, True, g).values)


class TestBuild:
    def test_identity_atoms(self, grid):
        src = SourceSpectrum.flat(grid)
        one_f = filter_response(np.zeros(grid.n_bins), 0.0, "none")
        one_d = detector_response(np.full(grid.n_bins, 1e6), 1.0, False)
        D = build_dictionary(src, [one_f], [one_d])
        assert D.n_atoms == 1
        np.testing.assert_allclose(D.columns[:, 0], 1 / grid.n_bins, rtol=1e-14)

    def test_columns_normalized_and_ordered(self, grid, table):
        src = SourceSpectrum.hump(grid)
        filters = [filter_response(table["Al"], t, "Al") for t in (0.5, 1.0)]
        dets = [detector_response(table["LuAG"], t, True, grid, "LuAG") for t in (0.03, 0.05, 0.07)]
        D = build_dictionary(src, filters, dets)
        assert D.n_atoms == 6
        np.testing.assert_allclose(D.columns.sum(axis=0), 1.0, atol=1e-12)
        assert D.provenance[4] == ColumnProvenance("Al", 1.0, 0.05)
        expected = src.values * filters[1].values * dets[1].values
        np.testing.assert_allclose(D.columns[:, 4], expected / expected.sum(), rtol=1e-13)

    def test_degenerate(self, grid):
        src = SourceSpectrum(grid, np.eye(grid.n_bins)[0])
        dead = detector_response(np.r_[0.0, np.ones(grid.n_bins - 1)], 1.0, False)
        with pytest.raises(DegenerateColumn):
            build_dictionary(src, [filter_response(np.zeros(grid.n_bins), 0.0)], [dead])

    def test_grid_mismatch(self, grid):
        with pytest.raises(GridMismatch):
            build_dictionary(SourceSpectrum.flat(grid), [filter_response([0.1], 1.0)],
                             [detector_response([1.0], 1.0, False)])

    @settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(st.floats(1e-6, 1e6))
    def test_source_scale_invariance(self, grid, table, c):
        src = SourceSpectrum.hump(grid)
        filters = [filter_response(table["Cu"], 0.3, "Cu")]
        dets = [detector_response(table["LuAG"], 0.05, True, grid)]
        a = build_dictionary(src, filters, dets).columns
        b = build_dictionary(src.scaled(c), filters, dets).columns
        np.testing.assert_allclose(a, b, rtol=1e-12)


class TestDefaultDictionary:
    def test_thickness_lists(self):
        assert len(thickness_range(0.1, 5.9, 0.2)) == 30
        assert len(thickness_range(0.2, 0.49, 0.01)) == 30
        lu = thickness_range(0.025, 0.095, 0.002)
        assert len(lu) == 36 and lu[0] == 0.025 and lu[-1] == 0.095

    def test_default_dictionary(self, grid, table):
        D = table2_default_dictionary(SourceSpectrum.hump(grid), table["Al"], table["Cu"], table["LuAG"])
        assert D.n_atoms == 60 * 36 == 2160
        assert D.provenance[0] == ColumnProvenance("Al", 0.1, 0.025)
        assert D.provenance[35] == ColumnProvenance("Al", 0.1, 0.095)
        assert D.provenance[36] == ColumnProvenance("Al", 0.3, 0.025)
        assert D.provenance[30 * 36] == ColumnProvenance("Cu", 0.2, 0.025)
        assert D.provenance[-1] == ColumnProvenance("Cu", 0.49, 0.095)
        np.testing.assert_allclose(D.columns.sum(axis=0), 1.0, atol=1e-9)
        assert np.all(D.columns >= 0)


class TestCsv:
    def test_roundtrip(self, tmp_path, grid, table):
        src = SourceSpectrum.hump(grid)
        D = build_dictionary(src, [filter_response(table["Al"], 0.1, "Al"), filter_response(table["Cu"], 0.33, "Cu")],
                             [detector_response(table["LuAG"], 0.061, True, grid)])
        write_dictionary_csv(D, tmp_path / "d.csv")
        E = read_dictionary_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(E.columns, D.columns)
        assert E.provenance == D.provenance
        assert E.grid == D.grid

    def test_source_csv(self, tmp_path, grid):
        f = tmp_path / "src.csv"
        rows = "".join(f"{e},{i + 1}\n" for i, e in enumerate(grid.centers))
        f.write_text("energy_keV,intensity\n" + rows)
        np.testing.assert_array_equal(read_source_csv(f, grid).values, np.arange(1, grid.n_bins + 1))
        f.write_text("energy_keV,intensity\n" + "".join(f"{e + 50},1\n" for e in grid.centers))
        with pytest.raises(GridMismatch):
            read_source_csv(f, grid)
