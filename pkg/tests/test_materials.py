import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dictse.errors import (
    CsvFormatError,
    DegenerateMaterial,
    DuplicateEnergy,
    ExtrapolationRequired,
    NegativeAttenuation,
)
from dictse.materials import (
    AttenuationCurve,
    EnergyGrid,
    MaterialTable,
    build_material_table,
    interpolate_to_grid,
    load_attenuation_csv,
    synthetic_lac,
)


def write_csv(tmp_path, rows, header="energy_keV,lac_per_mm", name="mat.csv"):
    p = tmp_path / name
    p.write_text(header + "\n" + "".join(f"{r}\n" for r in rows), encoding="utf-8")
    return p


def grid_with_centers(centers):
    """Grid whose bin centers are exactly ``centers`` (for point evaluation)."""
    centers = np.asarray(centers, dtype=float)
    edges = np.empty(centers.size + 1)
    edges[1:-1] = 0.5 * (centers[:-1] + centers[1:])
    edges[0] = 2 * centers[0] - edges[1]
    edges[-1] = 2 * centers[-1] - edges[-2]
    return EnergyGrid(edges)


class TestEnergyGrid:
    def test_centers_are_midpoints(self):
        g = EnergyGrid([1.0, 2.0, 4.0, 8.0])
        np.testing.assert_array_equal(g.centers, [1.5, 3.0, 6.0])
        assert g.n_bins == 3 and g.e_max == 8.0

    @pytest.mark.parametrize("edges", [[1.0, 2.0], [1.0, 3.0, 2.0], [0.0, 1.0, 2.0], [1.0, 1.0, 2.0]])
    def test_rejects_bad_edges(self, edges):
        with pytest.raises(ValueError):
            EnergyGrid(edges)

    def test_is_immutable(self):
        g = EnergyGrid.uniform(10, 100, 4)
        with pytest.raises(ValueError):
            g.edges[0] = 5.0


class TestLoadCsv:
    def test_two_rows(self, tmp_path):
        c = load_attenuation_csv(write_csv(tmp_path, ["10,2.0", "100,0.02"]))
        assert c.samples == [(10.0, 2.0), (100.0, 0.02)]
        assert c.material_id == "mat"

    def test_sorts_rows(self, tmp_path):
        c = load_attenuation_csv(write_csv(tmp_path, ["100,0.02", "10,2.0"]))
        assert c.samples == [(10.0, 2.0), (100.0, 0.02)]

    def test_negative_lac(self, tmp_path):
        with pytest.raises(NegativeAttenuation):
            load_attenuation_csv(write_csv(tmp_path, ["10,-1.0", "100,0.02"]))

    def test_duplicate_energy(self, tmp_path):
        with pytest.raises(DuplicateEnergy):
            load_attenuation_csv(write_csv(tmp_path, ["10,2.0", "10,1.0", "100,0.02"]))

    @pytest.mark.parametrize("rows,header", [
        (["10,2.0,3", "100,0.02"], "energy_keV,lac_per_mm"),
        (["10,abc", "100,0.02"], "energy_keV,lac_per_mm"),
        (["10,2.0"], "energy_keV,lac_per_mm"),
        (["10,2.0", "100,0.02"], "E,mu"),
    ])
    def test_malformed(self, tmp_path, rows, header):
        with pytest.raises(CsvFormatError):
            load_attenuation_csv(write_csv(tmp_path, rows, header))


class TestInterpolate:
    curve = AttenuationCurve("x", [10.0, 100.0], [2.0, 0.02])

    def test_endpoint(self):
        g = grid_with_centers([10.0, 12.0])
        assert interpolate_to_grid(self.curve, g)[0] == 2.0

    def test_loglog_midpoint(self):
        # log-energy midpoint of 10 and 100 maps to the log-LAC midpoint
        expected = math.exp((math.log(2.0) + math.log(0.02)) / 2)
        assert expected == pytest.approx(0.2, rel=1e-14)
        g = grid_with_centers([math.sqrt(1000.0), 60.0])
        assert interpolate_to_grid(self.curve, g)[0] == pytest.approx(0.2, rel=1e-12)

    def test_extrapolation(self):
        g = grid_with_centers([50.0, 120.0])
        with pytest.raises(ExtrapolationRequired):
            interpolate_to_grid(self.curve, g)

    def test_zero_segment_falls_back_to_linear(self):
        c = AttenuationCurve("z", [10.0, 20.0, 30.0], [0.0, 1.0, 0.5])
        g = grid_with_centers([15.0, 25.0])
        out = interpolate_to_grid(c, g)
        assert out[0] == pytest.approx(0.5)
        assert out[1] == pytest.approx(math.exp(math.log(1.0) + math.log(25 / 20) / math.log(30 / 20) * math.log(0.5)))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(1e-3, 1e3), min_size=3, max_size=8))
    def test_exact_at_samples_and_bracketed(self, lacs):
        energies = np.geomspace(5.0, 200.0, len(lacs))
        c = AttenuationCurve("h", energies, lacs)
        # bins centered on every interior sample plus in-between points
        centers = np.sort(np.concatenate([energies[1:-1], np.sqrt(energies[:-1] * energies[1:])]))
        g = grid_with_centers(centers)
        out = interpolate_to_grid(c, g)
        for e, v in zip(energies[1:-1], np.asarray(lacs)[1:-1]):
            j = int(np.argmin(np.abs(g.centers - e)))
            if g.centers[j] == e:
                assert out[j] == pytest.approx(v, rel=1e-12)
        hi = np.clip(np.searchsorted(energies, g.centers, side="right"), 1, len(lacs) - 1)
        lo = hi - 1
        lac = np.asarray(lacs)
        assert np.all(out >= np.minimum(lac[lo], lac[hi]) * (1 - 1e-12))
        assert np.all(out <= np.maximum(lac[lo], lac[hi]) * (1 + 1e-12))


class TestSyntheticLac:
    def test_constant(self, grid):
        np.testing.assert_array_equal(synthetic_lac(0.0, 0.5, grid), np.full(grid.n_bins, 0.5))

    def test_values_at_10kev(self):
        g = grid_with_centers([10.0, 20.0])
        assert synthetic_lac(1000.0, 0.0, g)[0] == pytest.approx(1.0)
        assert synthetic_lac(1000.0, 0.1, g)[0] == pytest.approx(1.1)

    def test_degenerate(self, grid):
        with pytest.raises(DegenerateMaterial):
            synthetic_lac(0.0, 0.0, grid)

    @given(st.floats(1e-3, 1e6), st.floats(0, 10))
    def test_monotone_positive(self, a, b):
        g = EnergyGrid.uniform(5.0, 150.0, 30)
        mu = synthetic_lac(a, b, g)
        assert np.all(mu > 0)
        assert np.all(np.diff(mu) <= 0)


def test_material_table(grid, tmp_path):
    curve = load_attenuation_csv(write_csv(tmp_path, ["1,100", "1000,0.001"]), "W")
    t = build_material_table(grid, {"W": curve, "toy": synthetic_lac(1.0, 0.1, grid)})
    assert t.materials == ["W", "toy"]
    assert t["W"].shape == (grid.n_bins,)
    with pytest.raises(NegativeAttenuation):
        MaterialTable(grid, {"bad": -np.ones(grid.n_bins)})
