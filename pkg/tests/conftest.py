"""Shared fixtures: a hand-countable three-storm track file and a synthetic covariate grid."""
import numpy as np
import pytest

# Grid for the fixtures: build_grid(0, 7.5, 0, 7.5, 2.5) -> 3x3 boxes,
# ids row-major by latitude then longitude.
#
# Hand-counted truth for TRACKS_3STORMS on that grid:
#   ALPHA: two fixes in box 0 during 2001, winds 40 and 45 -> (k=2, box 0, 2001) = 1
#   BRAVO: wind 30 in box 0 and 55 in box 1, 2001        -> (k=1, box 0) = 1, (k=3, box 1) = 1
#   CHARLIE: one fix in box 8 at wind 20, 2002           -> (k=1, box 8, 2002) = 1
#   plus one out-of-bounds fix (lat 20) that must be skipped with a warning.
TRACKS_3STORMS = """storm_id,iso_timestamp,lat,lon,max_wind_ms
ALPHA,2001-08-01T00:00:00,1.0,1.0,40.0
ALPHA,2001-08-01T06:00:00,1.2,1.1,45.0
BRAVO,2001-09-02T00:00:00,1.0,0.9,30.0
BRAVO,2001-09-02T06:00:00,1.0,3.8,55.0
CHARLIE,2002-07-10T00:00:00,6.0,6.0,20.0
CHARLIE,2002-07-10T06:00:00,20.0,6.0,20.0
"""

HAND_COUNTED = {(2, 0, 2001): 1, (1, 0, 2001): 1, (3, 1, 2001): 1, (1, 8, 2002): 1}


def synthetic_covariates_csv(n_boxes=9, years=range(1998, 2008), variables=("SST", "LHF"),
                             seed=0):
    """Trimester-resolution covariate rows with deterministic values."""
    rng = np.random.default_rng(seed)
    lines = ["variable,box_id,year,trimester,value"]
    for var in variables:
        base = rng.normal(size=(n_boxes, 4))
        for b in range(n_boxes):
            for y in years:
                for w in range(1, 5):
                    val = float(base[b, w - 1] + 0.8 * rng.normal() + 0.1 * (y - 2000))
                    lines.append(f"{var},{b},{y},{w},{val!r}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def tracks_file(tmp_path):
    p = tmp_path / "tracks.csv"
    p.write_text(TRACKS_3STORMS)
    return p


@pytest.fixture
def covariates_file(tmp_path):
    p = tmp_path / "covariates.csv"
    p.write_text(synthetic_covariates_csv())
    return p
