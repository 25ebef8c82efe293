"""Grids, index conventions, and dense field containers shared by every module."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

EARTH_RADIUS_KM = 6371.0


def great_circle_km(lat1, lon1, lat2, lon2):
    """Haversine distance in km between points given in degrees. Broadcasts."""
    la1, lo1, la2, lo2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    dlat = la2 - la1
    dlon = lo2 - lo1
    a = np.sin(dlat / 2.0) ** 2 + np.cos(la1) * np.cos(la2) * np.sin(dlon / 2.0) ** 2
    return EARTH_RADIUS_KM * 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


@dataclass(frozen=True)
class GridSpec:
    """Regular lat/lon lattice of square boxes.

    Box ids run 0..n_boxes-1, row-major with longitude varying fastest
    within each latitude row. ``valid`` marks boxes with usable covariate
    data; everything downstream of ingest operates on the valid subset.
    """

    lat: np.ndarray        # (N,) centroid latitudes, degrees
    lon: np.ndarray        # (N,) centroid longitudes, degrees
    size_deg: float
    valid: np.ndarray      # (N,) bool
    lat0: float = 0.0      # lattice origin (min corner), for point location
    lon0: float = 0.0
    n_lat: int = 0
    n_lon: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lat", np.asarray(self.lat, dtype=float))
        object.__setattr__(self, "lon", np.asarray(self.lon, dtype=float))
        object.__setattr__(self, "valid", np.asarray(self.valid, dtype=bool))
        if self.lat.shape != self.lon.shape or self.lat.shape != self.valid.shape:
            raise ValueError("lat, lon, valid must have equal lengths")

    @property
    def n_boxes(self) -> int:
        return self.lat.size

    def boxes(self):
        """Yield (id, lat_center, lon_center, size_deg) tuples."""
        for i in range(self.n_boxes):
            yield i, float(self.lat[i]), float(self.lon[i]), self.size_deg

    def locate(self, lat: float, lon: float) -> int:
        """Box id containing a point, or -1 if outside the lattice bounds.

        Cells are half-open: [edge, edge + size) in both coordinates.
        """
        if self.n_lat == 0 or self.n_lon == 0:
            raise ValueError("grid has no lattice shape information")
        i = int(np.floor((lat - self.lat0) / self.size_deg))
        j = int(np.floor((lon - self.lon0) / self.size_deg))
        if i < 0 or i >= self.n_lat or j < 0 or j >= self.n_lon:
            return -1
        return i * self.n_lon + j

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """(N, N) great-circle distances in km between box centroids."""
        d = great_circle_km(self.lat[:, None], self.lon[:, None], self.lat[None, :], self.lon[None, :])
        np.fill_diagonal(d, 0.0)
        return d

    def with_valid(self, valid: np.ndarray) -> "GridSpec":
        return GridSpec(self.lat, self.lon, self.size_deg, np.asarray(valid, bool),
                        self.lat0, self.lon0, self.n_lat, self.n_lon)


def build_grid(lat_min: float, lat_max: float, lon_min: float, lon_max: float,
               cell_size: float) -> GridSpec:
    """Tile [lat_min, lat_max] x [lon_min, lon_max] with square cells.

    Only whole cells are kept: a trailing sliver narrower than ``cell_size``
    at the max edge is dropped. Centroids sit at cell centers.
    """
    if cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    if not (lat_min < lat_max and lon_min < lon_max):
        raise ValueError("need lat_min < lat_max and lon_min < lon_max")
    n_lat = int(np.floor((lat_max - lat_min) / cell_size + 1e-9))
    n_lon = int(np.floor((lon_max - lon_min) / cell_size + 1e-9))
    if n_lat == 0 or n_lon == 0:
        raise ValueError("region smaller than one cell")
    lat_c = lat_min + cell_size * (np.arange(n_lat) + 0.5)
    lon_c = lon_min + cell_size * (np.arange(n_lon) + 0.5)
    lat = np.repeat(lat_c, n_lon)
    lon = np.tile(lon_c, n_lat)
    return GridSpec(lat, lon, cell_size, np.ones(lat.size, dtype=bool),
                    lat0=lat_min, lon0=lon_min, n_lat=n_lat, n_lon=n_lon)


def distance(grid: GridSpec, i: int, j: int) -> float:
    """Great-circle distance in km between centroids of boxes i and j."""
    n = grid.n_boxes
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"box id out of range: ({i}, {j}) with {n} boxes")
    if i == j:
        return 0.0
    return float(great_circle_km(grid.lat[i], grid.lon[i], grid.lat[j], grid.lon[j]))


@dataclass(frozen=True)
class IndexMap:
    """Flattening contract for (s, w, k, j) with j fastest, then k, w, s.

    Matches the factor order of the separable covariance
    space x trimester x response x level, so a field reshaped C-style to
    (N, M, K, J) flattens to the same vector this map produces.
    """

    n_sites: int
    n_trimesters: int
    n_responses: int
    n_levels: int

    @property
    def size(self) -> int:
        return self.n_sites * self.n_trimesters * self.n_responses * self.n_levels

    def flatten(self, s: int, w: int, k: int, j: int) -> int:
        N, M, K, J = self.n_sites, self.n_trimesters, self.n_responses, self.n_levels
        if not (0 <= s < N and 0 <= w < M and 0 <= k < K and 0 <= j < J):
            raise IndexError(f"index ({s},{w},{k},{j}) out of bounds for dims {(N, M, K, J)}")
        return ((s * M + w) * K + k) * J + j

    def unflatten(self, idx: int):
        if not (0 <= idx < self.size):
            raise IndexError(f"flat index {idx} out of range {self.size}")
        j = idx % self.n_levels
        idx //= self.n_levels
        k = idx % self.n_responses
        idx //= self.n_responses
        w = idx % self.n_trimesters
        s = idx // self.n_trimesters
        return s, w, k, j


@dataclass
class CountField:
    """Counts per (strength k, box s, year t); non-negative integers."""

    values: np.ndarray     # (K, N, T) int
    years: np.ndarray      # (T,) int

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.years = np.asarray(self.years, dtype=int)
        if self.values.ndim != 3:
            raise ValueError("count values must be (K, N, T)")
        if self.values.shape[2] != self.years.size:
            raise ValueError("year axis mismatch")
        if np.any(self.values < 0):
            raise ValueError("counts must be non-negative")
        self.values = self.values.astype(np.int64)

    @property
    def n_strengths(self) -> int:
        return self.values.shape[0]

    @property
    def n_boxes(self) -> int:
        return self.values.shape[1]

    @property
    def n_years(self) -> int:
        return self.values.shape[2]


@dataclass
class AnomalyField:
    """Covariate anomalies per (variable l, box s, year t, trimester w).

    Entries are departures from the per-(l, s, w) mean over years, so that
    mean vanishes by construction; NaN marks missing cells.
    """

    values: np.ndarray         # (L, N, T, M) float
    variables: list[str]
    years: np.ndarray          # (T,)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.years = np.asarray(self.years, dtype=int)
        if self.values.ndim != 4:
            raise ValueError("anomaly values must be (L, N, T, M)")
        if self.values.shape[0] != len(self.variables):
            raise ValueError("variable axis mismatch")
        if self.values.shape[2] != self.years.size:
            raise ValueError("year axis mismatch")
        with np.errstate(invalid="ignore"):
            m = np.nanmean(self.values, axis=2)
        m = m[np.isfinite(m)]
        if m.size and np.max(np.abs(m)) > 1e-8:
            raise ValueError("anomalies must have zero temporal mean per (variable, box, trimester)")

    @property
    def n_trimesters(self) -> int:
        return self.values.shape[3]


# -- grid CSV interface: header box_id,lat,lon,valid ---------------------------

def write_grid_csv(grid: GridSpec, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["box_id", "lat", "lon", "valid"])
        for i in range(grid.n_boxes):
            w.writerow([i, repr(float(grid.lat[i])), repr(float(grid.lon[i])), int(grid.valid[i])])


def read_grid_csv(path) -> GridSpec:
    ids, lat, lon, valid = [], [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.DictReader(f)
        for row in r:
            ids.append(int(row["box_id"]))
            lat.append(float(row["lat"]))
            lon.append(float(row["lon"]))
            valid.append(bool(int(row["valid"])))
    order = np.argsort(ids)
    ids = np.asarray(ids)[order]
    if not np.array_equal(ids, np.arange(ids.size)):
        raise ValueError("grid box ids must be unique and contiguous from 0")
    lat = np.asarray(lat)[order]
    lon = np.asarray(lon)[order]
    valid = np.asarray(valid)[order]
    # recover lattice shape from the unique centroid coordinates
    ulat = np.unique(lat)
    ulon = np.unique(lon)
    size = float(np.min(np.diff(ulat))) if ulat.size > 1 else (
        float(np.min(np.diff(ulon))) if ulon.size > 1 else 1.0)
    return GridSpec(lat, lon, size, valid,
                    lat0=float(ulat[0] - size / 2), lon0=float(ulon[0] - size / 2),
                    n_lat=ulat.size, n_lon=ulon.size)
