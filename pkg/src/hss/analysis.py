"""Posterior summaries and the comparison metrics: MAD, zero detection, MSE, DIC, factor flags."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CountField
from .eof import ScoreSet
from .likelihood import ETA_CLAMP, phm_logpmf, phm_mean
from .sampler import PosteriorChain


@dataclass
class CredibleSummary:
    """Equal-tailed 95% posterior summary; arrays share the parameter shape."""

    median: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def significant(self) -> np.ndarray:
        """True where the interval excludes zero."""
        return (self.lo > 0) | (self.hi < 0)


def summarize(draws: np.ndarray, axis: int = 0) -> CredibleSummary:
    """Median, mean, and 2.5/97.5% quantiles over the draw axis."""
    draws = np.asarray(draws, dtype=float)
    if draws.shape[axis] == 0:
        raise ValueError("no draws to summarize")
    lo, med, hi = np.quantile(draws, [0.025, 0.5, 0.975], axis=axis)
    return CredibleSummary(median=med, mean=np.mean(draws, axis=axis), lo=lo, hi=hi)


def mad_statistic(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Median absolute deviation pooled over all provided indices."""
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.size == 0:
        raise ValueError("empty estimates")
    if estimates.shape != truth.shape:
        raise ValueError("estimates and truth shapes differ")
    return float(np.median(np.abs(estimates - truth)))


def zero_detection(lo: np.ndarray, hi: np.ndarray, truth: np.ndarray) -> float:
    """Among true zeros, the fraction of credible intervals containing 0.

    Returns NaN when the truth has no exact zeros (the table's NA case).
    """
    truth = np.asarray(truth, dtype=float)
    zeros = truth == 0.0
    if not np.any(zeros):
        return float("nan")
    lo = np.asarray(lo, dtype=float)[zeros]
    hi = np.asarray(hi, dtype=float)[zeros]
    return float(np.mean((lo <= 0.0) & (hi >= 0.0)))


def mse(values: np.ndarray, truth: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if values.shape != truth.shape:
        raise ValueError("length mismatch between estimates and truth")
    return float(np.mean((values - truth) ** 2))


def _predictor_means(chain: PosteriorChain, xi: ScoreSet, batch: int = 200):
    """Posterior means of (p, lambda) per cell, and per-draw deviance pieces.

    Returns (pbar, lambda_bar) with shape (K, N, T); for reduced chains
    (J == 1) pbar is None and lambda_bar is the mean Poisson rate.
    """
    d = chain.dims
    J = d["J"]
    xg = xi.grouped()                                   # (G, M, T)
    n = chain.n_kept
    K, N, T = d["K"], d["N"], d["T"]
    p_sum = np.zeros((K, N, T))
    lam_sum = np.zeros((K, N, T))
    for start in range(0, n, batch):
        b = chain.beta[start:start + batch]             # (b, G, N, M, KJ)
        bb = b.reshape(b.shape[0], d["G"], N, d["M"], K, J)
        eta = np.einsum("dgswkj,gwt->dkjst", bb, xg)
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        if J == 2:
            p_sum += (1.0 / (1.0 + np.exp(-eta[:, :, 0]))).sum(axis=0)
            lam_sum += np.exp(eta[:, :, 1]).sum(axis=0)
        else:
            lam_sum += np.exp(eta[:, :, 0]).sum(axis=0)
    pbar = p_sum / n if J == 2 else None
    return pbar, lam_sum / n


def dic(chain: PosteriorChain, y, xi: ScoreSet) -> float:
    """Deviance information criterion D_bar + p_D.

    The plug-in deviance is evaluated at the posterior means of p and
    lambda per cell rather than of beta, whose spike-and-slab posterior is
    multimodal.
    """
    if chain.n_kept < 100:
        raise ValueError(f"DIC needs at least 100 kept draws, have {chain.n_kept}")
    values = y.values if isinstance(y, CountField) else np.asarray(y)
    d_bar = float(np.mean(-2.0 * chain.loglik))
    pbar, lam_bar = _predictor_means(chain, xi)
    if chain.dims["J"] == 2:
        ll_plug = float(np.sum(phm_logpmf(values, pbar, lam_bar)))
    else:
        vals = values if values.ndim == 3 else values[None]
        from scipy.special import gammaln
        ll_plug = float(np.sum(vals * np.log(lam_bar) - lam_bar - gammaln(vals + 1.0)))
    d_plug = -2.0 * ll_plug
    p_d = d_bar - d_plug
    return d_bar + p_d


def dic_parts(d_bar: float, d_plug: float) -> tuple[float, float]:
    """(p_D, DIC) from a mean deviance and a plug-in deviance."""
    p_d = d_bar - d_plug
    return p_d, d_bar + p_d


def response_mse(y, pbar: np.ndarray | None, lam_bar: np.ndarray) -> float:
    """Mean squared error of observed counts against posterior expected counts."""
    values = y.values if isinstance(y, CountField) else np.asarray(y)
    if pbar is None:
        expected = lam_bar
    else:
        expected = phm_mean(pbar, lam_bar)
    return float(np.mean((values - expected) ** 2))


def significant_factors(lo: np.ndarray, hi: np.ndarray, median: np.ndarray,
                        threshold: float = 0.10, direction_share: float = 0.60):
    """Flag (marginal, trimester) pairs with widespread nonzero coefficients.

    Inputs have shape (..., N, M): any leading marginal axes, then sites
    and trimesters. A pair is flagged when strictly more than ``threshold``
    of its sites have intervals excluding zero; direction is '+' or '-'
    when strictly more than ``direction_share`` of those sites lean one
    way, else 'mixed'. Returns a list of dict records.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    median = np.asarray(median, dtype=float)
    if lo.shape != hi.shape or lo.shape != median.shape:
        raise ValueError("summary arrays must share a shape")
    *lead, N, M = lo.shape
    lead_shape = tuple(lead)
    out = []
    for a_idx in np.ndindex(lead_shape) if lead_shape else [()]:
        for w in range(M):
            sl = a_idx + (slice(None), w)
            sig = (lo[sl] > 0) | (hi[sl] < 0)
            frac = float(np.mean(sig))
            flagged = frac > threshold
            direction = ""
            if np.any(sig):
                pos_share = float(np.mean(median[sl][sig] > 0))
                if pos_share > direction_share:
                    direction = "+"
                elif (1.0 - pos_share) > direction_share:
                    direction = "-"
                else:
                    direction = "mixed"
            out.append({
                "index": a_idx, "trimester": w + 1, "fraction": frac,
                "direction": direction, "flagged": flagged,
                "magnitude": float(np.sum(np.abs(median[sl][sig]))) if np.any(sig) else 0.0,
            })
    return out
