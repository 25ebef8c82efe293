"""Convert raw storm-track and gridded covariate files into model-ready fields."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .core import AnomalyField, CountField, GridSpec

log = logging.getLogger(__name__)

KT_TO_MS = 0.514444

# trimester w (1..4) of a calendar month: Jan-Mar, Apr-Jun, Jul-Sep, Oct-Dec
def _trimester_of_month(month: int) -> int:
    return (month - 1) // 3 + 1


@dataclass(frozen=True)
class TrackFix:
    """One 6-hourly track report."""

    storm_id: str
    timestamp: datetime
    lat: float
    lon: float
    max_wind: float    # m/s

    def __post_init__(self):
        if self.max_wind < 0:
            raise ValueError(f"max_wind must be >= 0, got {self.max_wind}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")


@dataclass
class CovariateSeries:
    """One gridded covariate at daily or trimester resolution.

    Daily values are held as (N, T, 12, 31) with NaN padding; trimester
    values as (N, T, M=4).
    """

    variable: str
    years: np.ndarray
    resolution: str            # "daily" | "trimester"
    values: np.ndarray

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.resolution not in ("daily", "trimester"):
            raise ValueError(f"unknown resolution {self.resolution!r}")


def classify_strength(max_wind: float) -> int:
    """Strength class from sustained wind in m/s: [0,33) -> 1, [33,50) -> 2, [50,inf) -> 3."""
    if max_wind < 0:
        raise ValueError(f"negative wind speed: {max_wind}")
    if max_wind < 33.0:
        return 1
    if max_wind < 50.0:
        return 2
    return 3


def count_tracks(fixes: list[TrackFix], grid: GridSpec, years=None,
                 classification: str = "per_box") -> CountField:
    """Count unique storms per (strength, box, year).

    A storm contributes at most once to any (k, s, t) cell. With
    ``classification="per_box"`` (default) the class k of a storm in a
    given box-year is taken from the maximum wind among its fixes inside
    that box during that year; ``"lifetime_max"`` classifies the storm
    once by its overall maximum wind. Fixes outside the grid bounds are
    skipped and counted in a logged warning.
    """
    if classification not in ("per_box", "lifetime_max"):
        raise ValueError(f"unknown classification mode {classification!r}")
    if years is None:
        years = sorted({f.timestamp.year for f in fixes})
    years = np.asarray(sorted(years), dtype=int)
    year_pos = {int(y): i for i, y in enumerate(years)}
    K = 3
    counts = np.zeros((K, grid.n_boxes, years.size), dtype=np.int64)

    # max wind per (storm, box, year), plus lifetime max per storm
    cell_max: dict[tuple[str, int, int], float] = {}
    life_max: dict[str, float] = {}
    n_skipped = 0
    for f in fixes:
        life_max[f.storm_id] = max(life_max.get(f.storm_id, 0.0), f.max_wind)
        box = grid.locate(f.lat, f.lon)
        t = year_pos.get(f.timestamp.year)
        if box < 0 or t is None:
            n_skipped += 1
            continue
        key = (f.storm_id, box, t)
        cell_max[key] = max(cell_max.get(key, 0.0), f.max_wind)
    if n_skipped:
        log.warning("count_tracks: skipped %d fixes outside the grid bounds or year range", n_skipped)

    for (storm, box, t), wmax in cell_max.items():
        wind = life_max[storm] if classification == "lifetime_max" else wmax
        k = classify_strength(wind)
        counts[k - 1, box, t] += 1
    return CountField(counts, years)


def trimester_average(daily: CovariateSeries) -> CovariateSeries:
    """Average daily values into the four trimesters of each (box, year).

    The mean weights each available day equally; a trimester with no
    observations becomes NaN.
    """
    if daily.resolution != "daily":
        raise ValueError("input must be a daily series")
    vals = daily.values                      # (N, T, 12, 31)
    N, T = vals.shape[0], vals.shape[1]
    out = np.full((N, T, 4), np.nan)
    for w in range(4):
        chunk = vals[:, :, 3 * w:3 * (w + 1), :].reshape(N, T, -1)
        have = np.isfinite(chunk)
        n = have.sum(axis=2)
        with np.errstate(invalid="ignore"):
            s = np.where(have, chunk, 0.0).sum(axis=2)
            out[:, :, w] = np.where(n > 0, s / np.maximum(n, 1), np.nan)
    return CovariateSeries(daily.variable, daily.years, "trimester", out)


def compute_anomalies(trimester: CovariateSeries) -> AnomalyField:
    """Departures from the per-(box, trimester) mean over years."""
    if trimester.resolution != "trimester":
        raise ValueError("input must be a trimester series")
    vals = trimester.values                  # (N, T, M)
    n_years = np.isfinite(vals).sum(axis=1)  # (N, M)
    if vals.shape[1] < 2 or not np.any(n_years >= 2):
        raise ValueError("anomalies need at least 2 years per (box, trimester)")
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(np.where(n_years[:, None, :] >= 2, vals, np.nan), axis=1, keepdims=True)
    anom = vals - mean                       # NaN where input missing or single-year
    return AnomalyField(anom[None, :, :, :], [trimester.variable], trimester.years)


def stack_anomalies(fields: list[AnomalyField]) -> AnomalyField:
    """Combine single-variable anomaly fields into one (L, N, T, M) field."""
    if not fields:
        raise ValueError("no anomaly fields given")
    years = fields[0].years
    for f in fields[1:]:
        if not np.array_equal(f.years, years):
            raise ValueError("anomaly fields cover different years")
    values = np.concatenate([f.values for f in fields], axis=0)
    names = [v for f in fields for v in f.variables]
    return AnomalyField(values, names, years)


def coverage_mask(fields: list[AnomalyField]) -> np.ndarray:
    """Boxes with complete data across variables, years, and trimesters.

    Missing covariate cells propagate into the grid mask instead of being
    imputed.
    """
    stacked = stack_anomalies(fields) if len(fields) > 1 else fields[0]
    return np.isfinite(stacked.values).all(axis=(0, 2, 3))


# -- HURDAT2 conversion ---------------------------------------------------------

def parse_hurdat2(lines) -> list[TrackFix]:
    """Convert raw HURDAT2 lines to track fixes.

    All HURDAT2 quirks live here: header rows introduce a storm id and a
    fix count, data rows carry ddmm timestamps, hemisphere-suffixed
    coordinates, and winds in knots (converted at 0.514444 m/s per kt).
    Missing winds (-99) are treated as zero.
    """
    fixes: list[TrackFix] = []
    storm_id = None
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 6:                      # header row: id, name, n_rows
            storm_id = parts[0]
            continue
        if storm_id is None:
            raise ValueError("HURDAT2 data row before any header row")
        ymd, hhmm = parts[0], parts[1]
        ts = datetime(int(ymd[:4]), int(ymd[4:6]), int(ymd[6:8]),
                      int(hhmm[:2]), int(hhmm[2:]), tzinfo=timezone.utc)
        lat = float(parts[4][:-1]) * (1.0 if parts[4][-1] in "Nn" else -1.0)
        lon = float(parts[5][:-1]) * (1.0 if parts[5][-1] in "Ee" else -1.0)
        wind_kt = float(parts[6])
        wind = max(wind_kt, 0.0) * KT_TO_MS
        fixes.append(TrackFix(storm_id, ts, lat, lon, wind))
    return fixes


# -- CSV interfaces ---------------------------------------------------------------

def read_tracks_csv(path) -> list[TrackFix]:
    """Track CSV: storm_id,iso_timestamp,lat,lon,max_wind_ms."""
    fixes = []
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.DictReader(f)
        if r.fieldnames is None:
            return []
        for lineno, row in enumerate(r, start=2):
            try:
                fixes.append(TrackFix(
                    row["storm_id"],
                    datetime.fromisoformat(row["iso_timestamp"]),
                    float(row["lat"]), float(row["lon"]), float(row["max_wind_ms"]),
                ))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}: bad track row at line {lineno}: {e}") from e
    return fixes


def write_counts_csv(counts: CountField, path):
    """Counts CSV: strength,box_id,year,count (all cells, zeros included)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["strength", "box_id", "year", "count"])
        K, N, T = counts.values.shape
        for k in range(K):
            for s in range(N):
                for t in range(T):
                    w.writerow([k + 1, s, int(counts.years[t]), int(counts.values[k, s, t])])


def read_counts_csv(path) -> CountField:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.DictReader(f)
        for lineno, row in enumerate(r, start=2):
            try:
                rows.append((int(row["strength"]), int(row["box_id"]),
                             int(row["year"]), int(row["count"])))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}: bad counts row at line {lineno}: {e}") from e
    if not rows:
        raise ValueError(f"{path}: empty counts file")
    ks = sorted({r[0] for r in rows})
    boxes = sorted({r[1] for r in rows})
    years = sorted({r[2] for r in rows})
    kpos = {k: i for i, k in enumerate(ks)}
    bpos = {b: i for i, b in enumerate(boxes)}
    ypos = {y: i for i, y in enumerate(years)}
    values = np.zeros((len(ks), len(boxes), len(years)), dtype=np.int64)
    for k, b, y, c in rows:
        values[kpos[k], bpos[b], ypos[y]] = c
    return CountField(values, np.asarray(years))


def read_covariates_csv(path) -> list[CovariateSeries]:
    """Covariate CSV at either resolution.

    Trimester files: variable,box_id,year,trimester,value. Daily files
    carry a date column instead: variable,box_id,date,value.
    """
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.DictReader(f)
        if r.fieldnames is None:
            raise ValueError(f"{path}: empty covariate file")
        cols = set(r.fieldnames)
        daily = "date" in cols
        if not daily and not {"year", "trimester"} <= cols:
            raise ValueError(f"{path}: need either a date column or year+trimester columns")
        rows = []
        for lineno, row in enumerate(r, start=2):
            try:
                if daily:
                    d = datetime.fromisoformat(row["date"])
                    rows.append((row["variable"], int(row["box_id"]),
                                 d.year, d.month, d.day, float(row["value"])))
                else:
                    rows.append((row["variable"], int(row["box_id"]),
                                 int(row["year"]), int(row["trimester"]), 0, float(row["value"])))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}: bad covariate row at line {lineno}: {e}") from e
    if not rows:
        raise ValueError(f"{path}: empty covariate file")
    variables = list(dict.fromkeys(r[0] for r in rows))
    boxes = sorted({r[1] for r in rows})
    years = sorted({r[2] for r in rows})
    n_box = max(boxes) + 1       # box ids index the grid directly
    ypos = {y: i for i, y in enumerate(years)}
    out = []
    for var in variables:
        if daily:
            vals = np.full((n_box, len(years), 12, 31), np.nan)
            for v, b, y, mo, dy, x in rows:
                if v == var:
                    vals[b, ypos[y], mo - 1, dy - 1] = x
            out.append(CovariateSeries(var, np.asarray(years), "daily", vals))
        else:
            vals = np.full((n_box, len(years), 4), np.nan)
            for v, b, y, w, _, x in rows:
                if v == var:
                    vals[b, ypos[y], w - 1] = x
            out.append(CovariateSeries(var, np.asarray(years), "trimester", vals))
    return out


def write_anomalies_csv(anoms: AnomalyField, path):
    """Anomaly CSV uses the trimester covariate schema; missing cells are blank."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["variable", "box_id", "year", "trimester", "value"])
        L, N, T, M = anoms.values.shape
        for li in range(L):
            for s in range(N):
                for t in range(T):
                    for wi in range(M):
                        v = anoms.values[li, s, t, wi]
                        w.writerow([anoms.variables[li], s, int(anoms.years[t]), wi + 1,
                                    "" if not np.isfinite(v) else repr(float(v))])


def read_anomalies_csv(path) -> AnomalyField:
    series = read_covariates_csv(path)
    fields = [compute_anomalies_passthrough(s) for s in series]
    return stack_anomalies(fields)


def compute_anomalies_passthrough(trimester: CovariateSeries) -> AnomalyField:
    """Wrap already-centered trimester values as anomalies without re-centering."""
    return AnomalyField(trimester.values[None], [trimester.variable], trimester.years)
