"""Orthogonal spatial patterns and score series for anomaly fields, per covariate and trimester."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import AnomalyField


@dataclass
class EofBasis:
    """Truncated SVD basis of one (variable, trimester) anomaly matrix.

    ``phi`` holds unit-norm spatial maps as rows (R, N); scores carry the
    singular-value magnitude. Invalid boxes appear as NaN columns.
    """

    phi: np.ndarray
    singular_values: np.ndarray
    rank: int
    residual_variance_fraction: float


@dataclass
class ScoreSet:
    """Score series xi[l, r, t, w] with their variable names and years."""

    xi: np.ndarray             # (L, R, T, M)
    variables: list[str]
    years: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.years = np.asarray(self.years, dtype=int)
        if self.xi.ndim != 4:
            raise ValueError("scores must be (L, R, T, M)")

    @property
    def n_groups(self) -> int:
        return self.xi.shape[0] * self.xi.shape[1]

    def grouped(self) -> np.ndarray:
        """Scores reshaped to (G, M, T) with G = L*R, r fastest within l."""
        L, R, T, M = self.xi.shape
        return self.xi.reshape(L * R, T, M).transpose(0, 2, 1).copy()


def eof_decompose(X: np.ndarray, threshold: float = 0.70, fixed_r: int | None = None,
                  valid: np.ndarray | None = None):
    """Decompose an (N, T) anomaly matrix into spatial maps and scores.

    Rank is the smallest count whose cumulative squared singular values
    reach ``threshold`` of the total, unless ``fixed_r`` overrides it.
    Each map is sign-fixed so its largest-magnitude entry is positive,
    which makes repeated calls bit-identical. Returns (EofBasis, scores)
    with scores of shape (R, T).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d (sites, years) matrix")
    if fixed_r is None and not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    N, T = X.shape
    if valid is None:
        valid = np.isfinite(X).all(axis=1)
    Xv = X[valid]
    if Xv.size == 0 or not np.any(np.abs(Xv) > 0):
        raise ValueError("anomaly matrix is empty or all zero")

    U, s, Vt = np.linalg.svd(Xv, full_matrices=False)
    tol = max(Xv.shape) * np.finfo(float).eps * s[0]
    num_rank = int(np.sum(s > tol))
    power = s ** 2
    cum = np.cumsum(power) / power.sum()
    if fixed_r is not None:
        if fixed_r < 0:
            raise ValueError("fixed_r must be >= 0")
        R = min(fixed_r, num_rank)
    else:
        R = int(np.searchsorted(cum, threshold - 1e-12) + 1)
        R = min(R, num_rank)

    phi_v = U[:, :R].T.copy()                    # (R, Nv) unit-norm maps
    scores = (s[:R, None] * Vt[:R, :]).copy()    # (R, T)
    for r in range(R):
        i = int(np.argmax(np.abs(phi_v[r])))
        if phi_v[r, i] < 0:
            phi_v[r] *= -1.0
            scores[r] *= -1.0
    phi = np.full((R, N), np.nan)
    phi[:, valid] = phi_v
    resid = 1.0 - (cum[R - 1] if R > 0 else 0.0)
    if R >= num_rank:
        resid = 0.0
    return EofBasis(phi, s[:R].copy(), R, float(resid)), scores


def reconstruct(basis: EofBasis, scores: np.ndarray) -> np.ndarray:
    """Sum of score-weighted maps, an (N, T) matrix (NaN on invalid boxes)."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != basis.phi.shape[0]:
        raise ValueError("score and basis ranks differ")
    if basis.rank == 0:
        return np.zeros((basis.phi.shape[1], scores.shape[1]))
    return basis.phi.T @ scores


def decompose_field(anoms: AnomalyField, threshold: float = 0.70, fixed_r: int | None = None,
                    valid: np.ndarray | None = None):
    """Run the decomposition for every (variable, trimester) slice.

    Returns (bases, scores) with bases a dict keyed by (variable, w) and
    scores a ragged dict keyed the same way. Use ``to_score_set`` when a
    uniform rank is required for fitting.
    """
    L, N, T, M = anoms.values.shape
    bases: dict[tuple[str, int], EofBasis] = {}
    scores: dict[tuple[str, int], np.ndarray] = {}
    for li, var in enumerate(anoms.variables):
        for w in range(M):
            X = anoms.values[li, :, :, w]
            b, sc = eof_decompose(X, threshold=threshold, fixed_r=fixed_r, valid=valid)
            bases[(var, w + 1)] = b
            scores[(var, w + 1)] = sc
    return bases, scores


def to_score_set(scores: dict[tuple[str, int], np.ndarray], variables: list[str],
                 years: np.ndarray, n_trimesters: int = 4) -> ScoreSet:
    """Assemble per-slice scores into a uniform (L, R, T, M) array.

    Fitting needs one R across slices; raises if the ranks differ (rerun
    the decomposition with fixed_r to force uniformity).
    """
    ranks = {sc.shape[0] for sc in scores.values()}
    if len(ranks) != 1:
        raise ValueError(f"score ranks differ across slices ({sorted(ranks)}); use fixed_r")
    R = ranks.pop()
    T = len(years)
    xi = np.zeros((len(variables), R, T, n_trimesters))
    for li, var in enumerate(variables):
        for w in range(1, n_trimesters + 1):
            xi[li, :, :, w - 1] = scores[(var, w)]
    return ScoreSet(xi, list(variables), years)


# -- CSV interfaces ----------------------------------------------------------------

def write_scores_csv(scores: dict[tuple[str, int], np.ndarray], years, path):
    """Scores CSV: variable,trimester,score_index,year,value."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["variable", "trimester", "score_index", "year", "value"])
        for (var, wi), sc in scores.items():
            for r in range(sc.shape[0]):
                for t, year in enumerate(years):
                    w.writerow([var, wi, r + 1, int(year), repr(float(sc[r, t]))])


def read_scores_csv(path) -> ScoreSet:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.DictReader(f)
        for lineno, row in enumerate(r, start=2):
            try:
                rows.append((row["variable"], int(row["trimester"]), int(row["score_index"]),
                             int(row["year"]), float(row["value"])))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}: bad score row at line {lineno}: {e}") from e
    if not rows:
        raise ValueError(f"{path}: empty scores file")
    variables = list(dict.fromkeys(x[0] for x in rows))
    trims = sorted({x[1] for x in rows})
    ranks = sorted({x[2] for x in rows})
    years = sorted({x[3] for x in rows})
    if ranks != list(range(1, len(ranks) + 1)):
        raise ValueError(f"{path}: score indices must be contiguous from 1")
    xi = np.full((len(variables), len(ranks), len(years), len(trims)), np.nan)
    vpos = {v: i for i, v in enumerate(variables)}
    ypos = {y: i for i, y in enumerate(years)}
    for var, wi, ri, yr, val in rows:
        xi[vpos[var], ri - 1, ypos[yr], wi - 1] = val
    if not np.isfinite(xi).all():
        raise ValueError(f"{path}: score table has holes; expected every "
                         "(variable, trimester, score, year) combination")
    return ScoreSet(xi, variables, np.asarray(years))


def write_eofs_csv(bases: dict[tuple[str, int], EofBasis], path):
    """EOF map CSV: variable,trimester,score_index,box_id,value (blank when masked)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["variable", "trimester", "score_index", "box_id", "value"])
        for (var, wi), b in bases.items():
            R, N = b.phi.shape
            for r in range(R):
                for s in range(N):
                    v = b.phi[r, s]
                    w.writerow([var, wi, r + 1, s, "" if not np.isfinite(v) else repr(float(v))])
