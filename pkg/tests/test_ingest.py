from datetime import datetime, timezone

import numpy as np
import pytest

from hss.core import build_grid
from hss.ingest import (CovariateSeries, TrackFix, classify_strength, compute_anomalies,
                        count_tracks, coverage_mask, parse_hurdat2, read_covariates_csv,
                        read_tracks_csv, trimester_average, write_anomalies_csv,
                        read_anomalies_csv, write_counts_csv, read_counts_csv)


def _ts(year, month=8, day=1, hour=0):
    return datetime(year, month, day, hour, tzinfo=timezone.utc)


class TestClassify:
    def test_low(self):
        assert classify_strength(32.9) == 1

    def test_mid(self):
        assert classify_strength(40.0) == 2

    def test_strong_boundary(self):
        assert classify_strength(50.0) == 3

    def test_boundary_33(self):
        assert classify_strength(33.0) == 2

    def test_negative(self):
        with pytest.raises(ValueError):
            classify_strength(-1.0)

    def test_monotone(self):
        winds = np.linspace(0, 90, 400)
        ks = [classify_strength(w) for w in winds]
        assert all(a <= b for a, b in zip(ks, ks[1:]))


class TestCountTracks:
    def setup_method(self):
        self.grid = build_grid(0, 7.5, 0, 7.5, 2.5)   # 3x3 boxes

    def test_unique_per_cell(self):
        fixes = [TrackFix("S1", _ts(2001, 8, d), 1.0, 1.0, 40.0) for d in range(1, 5)]
        c = count_tracks(fixes, self.grid)
        assert c.values[1, 0, 0] == 1                  # k=2 at box 0
        assert c.values.sum() == 1

    def test_per_box_classification(self):
        fixes = [TrackFix("S1", _ts(2001, 8, 1), 1.0, 1.0, 30.0),
                 TrackFix("S1", _ts(2001, 8, 2), 1.0, 3.8, 55.0)]
        c = count_tracks(fixes, self.grid)
        assert c.values[0, 0, 0] == 1                  # k=1 in first box
        assert c.values[2, 1, 0] == 1                  # k=3 in second box
        assert c.values.sum() == 2

    def test_lifetime_classification(self):
        fixes = [TrackFix("S1", _ts(2001, 8, 1), 1.0, 1.0, 30.0),
                 TrackFix("S1", _ts(2001, 8, 2), 1.0, 3.8, 55.0)]
        c = count_tracks(fixes, self.grid, classification="lifetime_max")
        assert c.values[2, 0, 0] == 1 and c.values[2, 1, 0] == 1
        assert c.values.sum() == 2

    def test_empty(self):
        c = count_tracks([], self.grid, years=[2001])
        assert c.values.sum() == 0

    def test_out_of_bounds_skipped(self, caplog):
        fixes = [TrackFix("S1", _ts(2001), 20.0, 1.0, 40.0),
                 TrackFix("S1", _ts(2001), 1.0, 1.0, 40.0)]
        with caplog.at_level("WARNING"):
            c = count_tracks(fixes, self.grid)
        assert c.values.sum() == 1
        assert any("skipped 1" in r.message for r in caplog.records)

    def test_each_storm_in_at_least_one_box(self):
        rng = np.random.default_rng(3)
        fixes = []
        for i in range(20):
            year = int(rng.integers(2000, 2003))
            for _ in range(int(rng.integers(1, 6))):
                fixes.append(TrackFix(f"S{i}", _ts(year), float(rng.uniform(0, 7.4)),
                                      float(rng.uniform(0, 7.4)), float(rng.uniform(0, 70))))
        c = count_tracks(fixes, self.grid)
        per_year_storms = {}
        for f in fixes:
            per_year_storms.setdefault(f.timestamp.year, set()).add(f.storm_id)
        for t, year in enumerate(c.years):
            n = len(per_year_storms[int(year)])
            assert c.values[:, :, t].sum() >= n
            assert c.values[:, :, t].sum() <= n * self.grid.n_boxes * 3


class TestTrimesterAverage:
    def _daily(self, fill):
        vals = np.full((1, 1, 12, 31), np.nan)
        fill(vals)
        return CovariateSeries("SST", np.array([2001]), "daily", vals)

    def test_constant(self):
        def fill(v):
            v[0, 0, :, :28] = 3.5
        tri = trimester_average(self._daily(fill))
        assert np.allclose(tri.values[0, 0], 3.5)

    def test_weighted_mean(self):
        # Jan=1 for 31 days, Feb=2 for 28, Mar=3 for 31 -> (31+56+93)/90 = 2.0
        def fill(v):
            v[0, 0, 0, :31] = 1.0
            v[0, 0, 1, :28] = 2.0
            v[0, 0, 2, :31] = 3.0
        tri = trimester_average(self._daily(fill))
        assert tri.values[0, 0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_missing_trimesters(self):
        def fill(v):
            v[0, 0, 6, :31] = 7.0                      # July only
        tri = trimester_average(self._daily(fill))
        assert tri.values[0, 0, 2] == pytest.approx(7.0)
        assert np.isnan(tri.values[0, 0, [0, 1, 3]]).all()


class TestAnomalies:
    def _tri(self, values):
        values = np.asarray(values, dtype=float)
        return CovariateSeries("SST", np.arange(2000, 2000 + values.shape[1]),
                               "trimester", values)

    def test_simple(self):
        vals = np.zeros((1, 3, 4))
        vals[0, :, 0] = [1.0, 2.0, 3.0]
        out = compute_anomalies(self._tri(vals))
        assert np.allclose(out.values[0, 0, :, 0], [-1.0, 0.0, 1.0])

    def test_constant_gives_zero(self):
        vals = np.full((2, 4, 4), 5.0)
        out = compute_anomalies(self._tri(vals))
        assert np.allclose(out.values, 0.0)

    def test_two_years(self):
        vals = np.zeros((1, 2, 4))
        vals[0, :, 1] = [4.0, 0.0]
        out = compute_anomalies(self._tri(vals))
        assert np.allclose(out.values[0, 0, :, 1], [2.0, -2.0])

    def test_single_year_rejected(self):
        with pytest.raises(ValueError):
            compute_anomalies(self._tri(np.ones((1, 1, 4))))

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        vals = rng.normal(size=(3, 6, 4))
        once = compute_anomalies(self._tri(vals))
        twice = compute_anomalies(CovariateSeries("SST", once.years, "trimester",
                                                  once.values[0]))
        assert np.allclose(twice.values, once.values, atol=1e-12)

    def test_mean_invariant(self):
        rng = np.random.default_rng(6)
        vals = rng.normal(size=(4, 9, 4)) * 10 + 3
        out = compute_anomalies(self._tri(vals))
        assert np.max(np.abs(out.values.mean(axis=2))) < 1e-10

    def test_missing_cells_propagate_to_mask(self):
        vals = np.ones((3, 4, 4)) + np.arange(4)[None, :, None]
        vals[1, 2, 3] = np.nan
        out = compute_anomalies(self._tri(vals))
        mask = coverage_mask([out])
        assert mask.tolist() == [True, False, True]


class TestHurdat2:
    def test_parse(self):
        lines = [
            "AL092011, IRENE, 2,",
            "20110821, 0000, , TS, 15.0N, 59.0W, 45, 1006,",
            "20110821, 0600, , TS, 15.4N, 60.0W, 50, 1005,",
        ]
        fixes = parse_hurdat2(lines)
        assert len(fixes) == 2
        assert fixes[0].storm_id == "AL092011"
        assert fixes[0].lat == pytest.approx(15.0)
        assert fixes[0].lon == pytest.approx(-59.0)
        assert fixes[0].max_wind == pytest.approx(45 * 0.514444)
        assert fixes[1].timestamp.hour == 6

    def test_data_before_header(self):
        with pytest.raises(ValueError):
            parse_hurdat2(["20110821, 0000, , TS, 15.0N, 59.0W, 45, 1006,"])


class TestCsv:
    def test_tracks_roundtrip(self, tmp_path):
        p = tmp_path / "tracks.csv"
        p.write_text("storm_id,iso_timestamp,lat,lon,max_wind_ms\n"
                     "S1,2001-08-01T00:00:00,1.0,1.0,40.0\n")
        fixes = read_tracks_csv(p)
        assert len(fixes) == 1 and fixes[0].max_wind == 40.0

    def test_tracks_bad_row_names_line(self, tmp_path):
        p = tmp_path / "tracks.csv"
        p.write_text("storm_id,iso_timestamp,lat,lon,max_wind_ms\n"
                     "S1,2001-08-01T00:00:00,1.0,1.0,40.0\n"
                     "S2,not-a-date,1.0,1.0,40.0\n")
        with pytest.raises(ValueError, match="line 3"):
            read_tracks_csv(p)

    def test_counts_roundtrip(self, tmp_path):
        grid = build_grid(0, 5, 0, 5, 2.5)
        fixes = [TrackFix("S1", _ts(2001), 1.0, 1.0, 40.0),
                 TrackFix("S2", _ts(2002), 4.0, 4.0, 55.0)]
        c = count_tracks(fixes, grid)
        p = tmp_path / "counts.csv"
        write_counts_csv(c, p)
        back = read_counts_csv(p)
        assert np.array_equal(back.values, c.values)
        assert np.array_equal(back.years, c.years)

    def test_covariates_trimester(self, tmp_path):
        p = tmp_path / "cov.csv"
        rows = ["variable,box_id,year,trimester,value"]
        for y in (2000, 2001):
            for w in (1, 2, 3, 4):
                rows.append(f"SST,0,{y},{w},{y - 2000 + w}")
        p.write_text("\n".join(rows) + "\n")
        series = read_covariates_csv(p)
        assert len(series) == 1 and series[0].resolution == "trimester"
        assert series[0].values[0, 1, 3] == pytest.approx(5.0)

    def test_covariates_daily(self, tmp_path):
        p = tmp_path / "cov.csv"
        p.write_text("variable,box_id,date,value\n"
                     "SST,0,2000-01-15,1.5\nSST,0,2000-02-10,2.5\n")
        series = read_covariates_csv(p)
        assert series[0].resolution == "daily"
        assert series[0].values[0, 0, 0, 14] == pytest.approx(1.5)

    def test_anomalies_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        vals = rng.normal(size=(2, 3, 5, 4))
        vals -= vals.mean(axis=2, keepdims=True)
        from hss.core import AnomalyField
        f = AnomalyField(vals, ["LHF", "SST"], np.arange(2000, 2005))
        p = tmp_path / "anoms.csv"
        write_anomalies_csv(f, p)
        back = read_anomalies_csv(p)
        assert back.variables == ["LHF", "SST"]
        assert np.allclose(back.values, f.values, atol=1e-12)
