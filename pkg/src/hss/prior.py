"""Spike-and-slab marginals, the Gaussian copula transform, and separable covariance algebra."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtr, ndtri

MIN_EIGENVALUE = 1e-12


# -- correlation kernels --------------------------------------------------------

def exp_kernel(h, range_km):
    """exp(-h / range) for distances h >= 0."""
    if range_km <= 0:
        raise ValueError(f"range must be positive, got {range_km}")
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("distances must be non-negative")
    out = np.exp(-h / range_km)
    return out if out.ndim else float(out)


def ar1_kernel(delta, rho):
    """rho ** delta for integer lags delta >= 0 and |rho| < 1."""
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    delta = np.asarray(delta)
    if np.any(delta < 0):
        raise ValueError("lags must be non-negative")
    out = np.asarray(float(rho) ** delta, dtype=float)
    return out if out.ndim else float(out)


def ordered_kernel(delta, rho):
    """Power correlation over ordered categories; same form as the AR1 kernel."""
    return ar1_kernel(delta, rho)


def power_corr_matrix(n: int, rho: float) -> np.ndarray:
    idx = np.arange(n)
    return ar1_kernel(np.abs(idx[:, None] - idx[None, :]), rho)


def wishart_correlation(dim: int, rng, df: int | None = None) -> np.ndarray:
    """Correlation matrix from a Wishart(identity, dim+2) draw, via Bartlett."""
    if df is None:
        df = dim + 2
    A = np.zeros((dim, dim))
    for i in range(dim):
        A[i, i] = np.sqrt(rng.chisquare(df - i))
        for j in range(i):
            A[i, j] = rng.normal()
    W = A @ A.T
    d = np.sqrt(np.diag(W))
    return W / np.outer(d, d)


# -- spike-and-slab marginal ------------------------------------------------------

@dataclass(frozen=True)
class SpikeSlabMarginal:
    """Two-component normal mixture: slab N(alpha, sigma^2) with weight pi,
    spike N(0, sigma^2 / C) with weight 1-pi. C may be inf (point mass at 0).
    """

    pi: float
    alpha: float
    sigma: float
    C: float = np.inf

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi must lie in [0, 1], got {self.pi}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")


def mixture_cdf(x, m: SpikeSlabMarginal):
    """Mixture cdf; with C = inf the spike contributes a unit step at 0."""
    x = np.asarray(x, dtype=float)
    slab = m.pi * ndtr((x - m.alpha) / m.sigma)
    if np.isinf(m.C):
        spike = (1.0 - m.pi) * (x >= 0.0)
    else:
        spike = (1.0 - m.pi) * ndtr(x * np.sqrt(m.C) / m.sigma)
    out = slab + spike
    return out if out.ndim else float(out)


def mixture_pdf(x, m: SpikeSlabMarginal):
    """Density of the continuous part (excludes the C = inf atom)."""
    x = np.asarray(x, dtype=float)
    root2pi = np.sqrt(2.0 * np.pi)
    slab = m.pi * np.exp(-0.5 * ((x - m.alpha) / m.sigma) ** 2) / (m.sigma * root2pi)
    if np.isinf(m.C):
        out = slab
    else:
        sc = m.sigma / np.sqrt(m.C)
        out = slab + (1.0 - m.pi) * np.exp(-0.5 * (x / sc) ** 2) / (sc * root2pi)
    return out if out.ndim else float(out)


def mixture_quantile(u, m: SpikeSlabMarginal):
    """Generalized inverse of the mixture cdf: smallest x with cdf(x) >= u.

    For C = inf the atom maps u in (F(0-), F(0)] to exactly 0 and the two
    continuous flanks invert in closed form. For finite C: bisection of the
    bracket alpha +/- 12 sigma united with 0 +/- 12 sigma/sqrt(C) down to
    width 1e-12, then two Newton polish steps.
    """
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("u must lie strictly inside (0, 1)")
    if np.isinf(m.C):
        out = np.zeros_like(u)
        f0m = m.pi * ndtr(-m.alpha / m.sigma)       # cdf just left of 0
        lowside = u <= f0m
        highside = u > f0m + (1.0 - m.pi)
        if np.any(lowside):
            out[lowside] = m.alpha + m.sigma * ndtri(u[lowside] / m.pi)
        if np.any(highside):
            out[highside] = m.alpha + m.sigma * ndtri((u[highside] - (1.0 - m.pi)) / m.pi)
    else:
        sc = m.sigma / np.sqrt(m.C)
        lo = np.full(u.shape, min(m.alpha - 12.0 * m.sigma, -12.0 * sc))
        hi = np.full(u.shape, max(m.alpha + 12.0 * m.sigma, 12.0 * sc))
        width = hi[0] - lo[0]
        n_steps = int(np.ceil(np.log2(width / 1e-12))) if width > 1e-12 else 1
        for _ in range(n_steps):
            mid = 0.5 * (lo + hi)
            below = mixture_cdf(mid, m) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        for _ in range(2):
            f = mixture_cdf(out, m) - u
            dens = mixture_pdf(out, m)
            step = np.where(dens > 1e-300, f / np.maximum(dens, 1e-300), 0.0)
            out = out - step
    return float(out[0]) if scalar else out


def copula_transform(theta, m: SpikeSlabMarginal):
    """Map latent standard-normal values through the marginal: F^{-1}(Phi(theta))."""
    theta = np.asarray(theta, dtype=float)
    u = ndtr(theta)
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    out = mixture_quantile(u.reshape(-1), m).reshape(theta.shape)
    return out if out.ndim else float(out)


# -- separable covariance ---------------------------------------------------------

def _check_correlation(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise ValueError(f"{name} must be symmetric")
    if not np.allclose(np.diag(mat), 1.0, atol=1e-10):
        raise ValueError(f"{name} must have a unit diagonal")
    return 0.5 * (mat + mat.T)


@dataclass
class SeparableCovariance:
    """Kronecker product of four correlation factors: space, trimester, response, level.

    Eigendecompositions are cached at construction; all operations run on
    the factors without ever forming the joint matrix. Immutable once
    built, safe for concurrent readers.
    """

    gamma_s: np.ndarray
    gamma_w: np.ndarray
    gamma_k: np.ndarray
    gamma_j: np.ndarray

    def __post_init__(self):
        self.gamma_s = _check_correlation(self.gamma_s, "gamma_s")
        self.gamma_w = _check_correlation(self.gamma_w, "gamma_w")
        self.gamma_k = _check_correlation(self.gamma_k, "gamma_k")
        self.gamma_j = _check_correlation(self.gamma_j, "gamma_j")
        eigs = []
        for name, g in zip("swkj", self.factors):
            lam, Q = np.linalg.eigh(g)
            if np.min(lam) <= MIN_EIGENVALUE:
                raise ValueError(f"gamma_{name} is not positive definite "
                                 f"(min eigenvalue {np.min(lam):.3e})")
            eigs.append((lam, Q))
        self._eigs = eigs

    @property
    def factors(self):
        return (self.gamma_s, self.gamma_w, self.gamma_k, self.gamma_j)

    @property
    def dims(self):
        return tuple(g.shape[0] for g in self.factors)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @cached_property
    def factor_inverses(self):
        return tuple(Q @ np.diag(1.0 / lam) @ Q.T for lam, Q in self._eigs)

    @classmethod
    def from_params(cls, distances: np.ndarray | None, n_sites: int, n_trimesters: int,
                    n_responses: int, n_levels: int,
                    range_km: float | None = None, rho_t: float | None = None,
                    rho_k: float | None = None, rho_j: float | None = None,
                    gamma_k: np.ndarray | None = None,
                    gamma_j: np.ndarray | None = None) -> "SeparableCovariance":
        """Assemble factors from kernel parameters; None leaves a factor at identity."""
        if range_km is not None:
            if distances is None:
                raise ValueError("spatial factor needs a distance matrix")
            gs = exp_kernel(distances, range_km)
        else:
            gs = np.eye(n_sites)
        gw = power_corr_matrix(n_trimesters, rho_t) if rho_t is not None else np.eye(n_trimesters)
        if gamma_k is None:
            gamma_k = power_corr_matrix(n_responses, rho_k) if rho_k is not None else np.eye(n_responses)
        if gamma_j is None:
            gamma_j = power_corr_matrix(n_levels, rho_j) if rho_j is not None else np.eye(n_levels)
        return cls(gs, gw, gamma_k, gamma_j)


def _mode_multiply(tensor: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    """Contract mat against one tensor mode: out[... i ...] = sum_j mat[i, j] t[... j ...]."""
    moved = np.moveaxis(tensor, axis, 0)
    out = np.tensordot(mat, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)


def kron_logdet(cov: SeparableCovariance) -> float:
    """log det of the joint matrix from per-factor eigenvalues."""
    dims = cov.dims
    total = int(np.prod(dims))
    out = 0.0
    for d, (lam, _) in zip(dims, cov._eigs):
        out += (total // d) * float(np.sum(np.log(lam)))
    return out


def kron_solve(cov: SeparableCovariance, v: np.ndarray) -> np.ndarray:
    """Sigma^{-1} v without forming the joint matrix.

    Accepts a flat vector of length N*M*K*J (j fastest) or the reshaped
    (N, M, K, J) tensor; returns the same shape.
    """
    dims = cov.dims
    flat = v.ndim == 1
    if flat:
        if v.size != int(np.prod(dims)):
            raise ValueError(f"vector length {v.size} does not match dims {dims}")
        t = v.reshape(dims)
    else:
        if v.shape != dims:
            raise ValueError(f"tensor shape {v.shape} does not match dims {dims}")
        t = v
    for axis, (lam, Q) in enumerate(cov._eigs):
        t = _mode_multiply(t, Q.T, axis)
    lam_joint = np.einsum("s,w,k,j->swkj", *(lam for lam, _ in cov._eigs))
    t = t / lam_joint
    for axis, (lam, Q) in enumerate(cov._eigs):
        t = _mode_multiply(t, Q, axis)
    return t.reshape(-1) if flat else t


def kron_quad(cov: SeparableCovariance, v: np.ndarray) -> float:
    """Quadratic form v^T Sigma^{-1} v via a half transform."""
    dims = cov.dims
    t = v.reshape(dims)
    for axis, (lam, Q) in enumerate(cov._eigs):
        t = _mode_multiply(t, Q.T, axis)
    lam_joint = np.einsum("s,w,k,j->swkj", *(lam for lam, _ in cov._eigs))
    return float(np.sum(t * t / lam_joint))


def kron_sample(cov: SeparableCovariance, rng) -> np.ndarray:
    """One draw of the latent field, shape (N, M, K, J), unit marginal variance."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    z = rng.standard_normal(cov.dims)
    for axis, (lam, Q) in enumerate(cov._eigs):
        z = _mode_multiply(z, Q * np.sqrt(lam)[None, :], axis)
    return z
