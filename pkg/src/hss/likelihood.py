"""Hurdle count model: probability parts, linear predictors, and simulation."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import CountField
from .eof import ScoreSet

log = logging.getLogger(__name__)

ETA_CLAMP = 30.0


@dataclass
class HurdleParams:
    """Occurrence probability p and intensity lambda per (k, s, t)."""

    p: np.ndarray
    lam: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.p.shape != self.lam.shape:
            raise ValueError("p and lambda shapes differ")
        if np.any(self.p <= 0) or np.any(self.p >= 1):
            raise ValueError("p must lie strictly inside (0, 1)")
        if np.any(self.lam <= 0):
            raise ValueError("lambda must be positive")


@dataclass
class CoefficientField:
    """Coefficients beta[j, k, l, r, s, w] with their latent Gaussian field.

    j indexes the model level (1 = occurrence, 2 = intensity), k the
    response, (l, r) the covariate score, s the box, w the trimester.
    Exact zeros are meaningful (spike atom).
    """

    beta: np.ndarray
    theta: np.ndarray | None = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim != 6:
            raise ValueError("beta must be (J, K, L, R, N, M)")
        if not np.isfinite(self.beta).all():
            raise ValueError("beta must be finite")
        if self.theta is not None:
            self.theta = np.asarray(self.theta, dtype=float)
            if self.theta.shape != self.beta.shape:
                raise ValueError("theta and beta shapes differ")


def _clamp_eta(eta: np.ndarray):
    n = int(np.sum(np.abs(eta) > ETA_CLAMP))
    if n:
        log.warning("clamped %d linear-predictor values to +/-%g", n, ETA_CLAMP)
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    return eta, n


def linear_predictors(beta: CoefficientField, xi: ScoreSet) -> HurdleParams:
    """Apply the logit/loglinear links to the score-weighted coefficient sums.

    eta[j, k, s, t] = sum over (l, r, w) of beta[j,k,l,r,s,w] * xi[l,r,t,w];
    p = logistic(eta_1) and lambda = exp(eta_2), with eta clamped to
    +/-30 before the links (clamp count reported on the result).
    """
    J = beta.beta.shape[0]
    if J != 2:
        raise ValueError("hurdle predictors need J=2 coefficient levels")
    if beta.beta.shape[2:4] != xi.xi.shape[:2]:
        raise ValueError("coefficient and score (l, r) dimensions differ")
    if beta.beta.shape[5] != xi.xi.shape[3]:
        raise ValueError("coefficient and score trimester dimensions differ")
    eta = np.einsum("jklrsw,lrtw->jkst", beta.beta, xi.xi)
    eta, n = _clamp_eta(eta)
    p = 1.0 / (1.0 + np.exp(-eta[0]))
    lam = np.exp(eta[1])
    return HurdleParams(p, lam, n_clamped=n)


def _log_expm1(lam):
    """log(exp(lam) - 1), stable for large lam."""
    lam = np.asarray(lam, dtype=float)
    small = lam <= 30.0
    out = np.empty_like(lam)
    out[small] = np.log(np.expm1(lam[small]))
    out[~small] = lam[~small] + np.log1p(-np.exp(-lam[~small]))
    return out


def phm_logpmf(m, p, lam):
    """Log pmf of the hurdle count model.

    Zero counts have mass 1-p; positive counts follow a zero-truncated
    Poisson with rate lam scaled by p.
    """
    m = np.asarray(m)
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(m < 0) or not np.issubdtype(m.dtype, np.integer):
        raise ValueError("counts must be non-negative integers")
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("p must lie strictly inside (0, 1)")
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    m, p, lam = np.broadcast_arrays(m, p, lam)
    out = np.where(
        m == 0,
        np.log1p(-p),
        np.log(p) + m * np.log(lam) - _log_expm1(lam) - gammaln(m + 1.0),
    )
    return out if out.ndim else float(out)


def phm_mean(p, lam):
    """Expected count p * lam / (1 - exp(-lam))."""
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("p must lie in [0, 1]")
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    out = p * lam / (-np.expm1(-lam))
    return out if out.ndim else float(out)


def poisson_loglik(y: np.ndarray, beta: CoefficientField, xi: ScoreSet) -> float:
    """Poisson log-likelihood for the reduced single-response, single-level model."""
    y = np.asarray(y)
    if np.any(y < 0):
        raise ValueError("counts must be non-negative")
    J, K = beta.beta.shape[:2]
    if J != 1 or K != 1:
        raise ValueError("reduced likelihood expects single-level, single-response beta")
    eta = np.einsum("lrsw,lrtw->st", beta.beta[0, 0], xi.xi)
    eta, _ = _clamp_eta(eta)
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def sample_truncated_poisson(lam, rng) -> np.ndarray:
    """Draw from a Poisson conditioned on being positive.

    Sequential CDF inversion for lam <= 20, rejection from the untruncated
    Poisson above that (where the zero mass is negligible anyway).
    """
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(lam.shape, dtype=np.int64)
    small = lam <= 20.0
    if np.any(small):
        lam_s = lam[small]
        u = rng.uniform(size=lam_s.shape) * (-np.expm1(-lam_s))  # target cdf area above m=0
        m = np.ones(lam_s.shape, dtype=np.int64)
        pm = lam_s * np.exp(-lam_s)
        cdf = pm.copy()
        active = cdf < u
        # cap guards against a float stall when u lands in the far tail
        for _ in range(500):
            if not np.any(active):
                break
            m[active] += 1
            pm[active] *= lam_s[active] / m[active]
            cdf[active] += pm[active]
            active = cdf < u
        out[small] = m
    if np.any(~small):
        lam_l = lam[~small]
        draws = rng.poisson(lam_l)
        bad = draws == 0
        while np.any(bad):
            draws[bad] = rng.poisson(lam_l[bad])
            bad = draws == 0
        out[~small] = draws
    return out


def phm_simulate(params: HurdleParams, seed, years=None) -> CountField:
    """Draw a count field from the hurdle model: gate then truncated Poisson."""
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    shape = params.p.shape
    gate = rng.uniform(size=shape) < params.p
    values = np.zeros(shape, dtype=np.int64)
    if np.any(gate):
        values[gate] = sample_truncated_poisson(params.lam[gate], rng)
    if years is None:
        years = np.arange(shape[-1])
    return CountField(values, years)
