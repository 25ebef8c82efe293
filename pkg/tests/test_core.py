import numpy as np
import pytest

from hss.core import (AnomalyField, CountField, GridSpec, IndexMap, build_grid,
                      distance, great_circle_km, read_grid_csv, write_grid_csv)


class TestBuildGrid:
    def test_basin_lattice(self):
        grid = build_grid(10, 62, -110, -10, 2.5)
        assert grid.n_boxes == 800
        assert grid.n_lat == 20 and grid.n_lon == 40

    def test_four_boxes(self):
        grid = build_grid(0, 5, 0, 5, 2.5)
        got = sorted(zip(grid.lat.tolist(), grid.lon.tolist()))
        assert got == [(1.25, 1.25), (1.25, 3.75), (3.75, 1.25), (3.75, 3.75)]

    def test_single_box(self):
        grid = build_grid(0, 2.5, 0, 2.5, 2.5)
        assert grid.n_boxes == 1
        assert grid.distance_matrix.shape == (1, 1)
        assert grid.distance_matrix[0, 0] == 0.0

    def test_bad_cell_size(self):
        with pytest.raises(ValueError):
            build_grid(0, 5, 0, 5, -1.0)

    def test_empty_region(self):
        with pytest.raises(ValueError):
            build_grid(0, 1, 0, 1, 2.5)

    def test_locate_half_open(self):
        grid = build_grid(0, 5, 0, 5, 2.5)
        assert grid.locate(0.0, 0.0) == 0
        assert grid.locate(2.5, 0.0) == grid.locate(2.6, 0.1)
        assert grid.locate(5.0, 0.0) == -1
        assert grid.locate(-0.1, 1.0) == -1


class TestDistance:
    def test_same_box(self):
        grid = build_grid(0, 5, 0, 5, 2.5)
        assert distance(grid, 2, 2) == 0.0

    def test_one_degree_longitude(self):
        # independent oracle: spherical law of cosines
        assert great_circle_km(0, 0, 0, 1) == pytest.approx(111.19492664454764, abs=1e-6)

    def test_quarter_circumference(self):
        assert great_circle_km(0, 0, 90, 0) == pytest.approx(10007.543398010286, abs=1e-6)

    def test_symmetry_and_id_check(self):
        grid = build_grid(0, 10, 0, 10, 2.5)
        assert distance(grid, 1, 7) == pytest.approx(distance(grid, 7, 1), abs=1e-12)
        with pytest.raises(IndexError):
            distance(grid, 0, grid.n_boxes)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(7)
        lat = rng.uniform(-80, 80, 300)
        lon = rng.uniform(-180, 180, 300)
        for _ in range(100):
            i, j, k = rng.integers(0, 300, 3)
            dij = great_circle_km(lat[i], lon[i], lat[j], lon[j])
            djk = great_circle_km(lat[j], lon[j], lat[k], lon[k])
            dik = great_circle_km(lat[i], lon[i], lat[k], lon[k])
            assert dik <= dij + djk + 1e-9


class TestIndexMap:
    def test_roundtrip_random(self):
        im = IndexMap(5, 4, 3, 2)
        assert im.size == 120
        rng = np.random.default_rng(0)
        for _ in range(1000):
            s, w, k, j = (int(rng.integers(0, n)) for n in (5, 4, 3, 2))
            assert im.unflatten(im.flatten(s, w, k, j)) == (s, w, k, j)

    def test_matches_c_order_reshape(self):
        im = IndexMap(3, 4, 2, 2)
        arr = np.arange(im.size).reshape(3, 4, 2, 2)
        for s in range(3):
            for w in range(4):
                for k in range(2):
                    for j in range(2):
                        assert arr[s, w, k, j] == im.flatten(s, w, k, j)

    def test_out_of_range(self):
        im = IndexMap(2, 2, 2, 2)
        with pytest.raises(IndexError):
            im.flatten(2, 0, 0, 0)
        with pytest.raises(IndexError):
            im.unflatten(16)


class TestFields:
    def test_count_field_rejects_negative(self):
        with pytest.raises(ValueError):
            CountField(-np.ones((1, 2, 3), dtype=int), np.arange(3))

    def test_anomaly_field_requires_zero_mean(self):
        vals = np.ones((1, 2, 3, 4))
        with pytest.raises(ValueError):
            AnomalyField(vals, ["SST"], np.arange(3))

    def test_anomaly_field_accepts_centered(self):
        rng = np.random.default_rng(1)
        vals = rng.normal(size=(2, 3, 5, 4))
        vals -= vals.mean(axis=2, keepdims=True)
        f = AnomalyField(vals, ["SST", "LHF"], np.arange(5))
        assert f.n_trimesters == 4


def test_grid_csv_roundtrip(tmp_path):
    grid = build_grid(10, 20, -30, -20, 2.5).with_valid(
        np.arange(16) % 3 != 0)
    path = tmp_path / "grid.csv"
    write_grid_csv(grid, path)
    back = read_grid_csv(path)
    assert np.allclose(back.lat, grid.lat)
    assert np.allclose(back.lon, grid.lon)
    assert np.array_equal(back.valid, grid.valid)
    assert back.size_deg == pytest.approx(2.5)
    assert back.locate(11.0, -29.0) == grid.locate(11.0, -29.0)
