"""Metropolis-within-Gibbs sampler for the hurdle model and its reduced single-response variants."""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from . import _kernels
from .core import CountField
from .eof import ScoreSet
from .likelihood import CoefficientField, linear_predictors, phm_logpmf, poisson_loglik
from .prior import (SeparableCovariance, exp_kernel, kron_logdet, kron_sample,
                    kron_solve, power_corr_matrix, wishart_correlation)

REDUCED_VARIANTS = ("M1", "M2", "M3")
FULL_VARIANTS = ("IN", "SP", "ST")

# which covariance factors are free per variant: (space, trimester, response, level)
_ACTIVE = {
    "IN": (False, False, False, False),
    "M1": (False, False, False, False),
    "SP": (True, False, False, False),
    "M2": (True, False, False, False),
    "M3": (True, True, False, False),
    "ST": (True, True, True, True),
}

SD_FLOOR = 1e-8


def adapt_step(current_sd, accept_rate, target, iteration):
    """Robbins-Monro update of a random-walk proposal scale (burn-in only).

    log sd moves by (accept_rate - target) / sqrt(1 + iteration); the result
    is floored at 1e-8. Works elementwise on arrays.
    """
    step = (np.asarray(accept_rate, dtype=float) - target) / np.sqrt(1.0 + iteration)
    out = np.maximum(np.exp(np.log(current_sd) + step), SD_FLOOR)
    return out if np.ndim(out) else float(out)


@dataclass
class FitConfig:
    """Sampler schedule, priors, and model variant.

    Variants M1/M2/M3 fit the reduced single-response Poisson model;
    IN/SP/ST fit the two-level hurdle model. Fields left as None resolve
    to per-mode defaults: alpha prior sd 1.0 and a Gamma(0.1, 0.1) prior on
    sigma for the hurdle mode, alpha sd sqrt(2) and an inverse-gamma prior
    on sigma^2 for the reduced mode, and 4 chains vs 1.
    """

    n_iter: int = 15000
    n_burn: int = 5000
    thin: int = 5
    target_accept: float = 0.30
    C: float = 100.0
    alpha_sd: float | None = None
    pi_prior: tuple = (1.0, 1.0)
    sigma_prior: str | None = None          # gamma_on_sigma | invgamma_on_sigma2
    sigma_prior_ab: tuple = (0.1, 0.1)
    range_upper_km: float = 300.0
    rho_bounds: tuple = (0.0, 1.0)
    category_cov: str = "power"             # power | wishart
    model_variant: str = "ST"
    seed: int = 0
    n_chains: int | None = None
    progress: bool = True
    save_theta: bool = False

    def __post_init__(self):
        if self.model_variant not in _ACTIVE:
            raise ValueError(f"unknown model variant {self.model_variant!r}")
        if not self.n_burn < self.n_iter:
            raise ValueError("need n_burn < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.C <= 0:
            raise ValueError("C must be positive (inf allowed)")
        reduced = self.model_variant in REDUCED_VARIANTS
        if self.alpha_sd is None:
            self.alpha_sd = math.sqrt(2.0) if reduced else 1.0
        if self.sigma_prior is None:
            self.sigma_prior = "invgamma_on_sigma2" if reduced else "gamma_on_sigma"
        if self.sigma_prior not in ("gamma_on_sigma", "invgamma_on_sigma2"):
            raise ValueError(f"unknown sigma prior {self.sigma_prior!r}")
        if self.category_cov not in ("power", "wishart"):
            raise ValueError(f"unknown category covariance mode {self.category_cov!r}")
        if self.n_chains is None:
            self.n_chains = 1 if reduced else 4

    @classmethod
    def simulation(cls, **overrides) -> "FitConfig":
        """Schedule used by the replicate study: 15000/5000/5, reduced model."""
        base = dict(n_iter=15000, n_burn=5000, thin=5, model_variant="M3", C=np.inf)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def application(cls, **overrides) -> "FitConfig":
        """Schedule for real-data runs: 20000/5000/5, full hurdle model."""
        base = dict(n_iter=20000, n_burn=5000, thin=5, model_variant="ST", C=100.0)
        base.update(overrides)
        return cls(**base)

    @property
    def is_reduced(self) -> bool:
        return self.model_variant in REDUCED_VARIANTS

    @property
    def n_kept(self) -> int:
        return (self.n_iter - self.n_burn) // self.thin


@dataclass
class PosteriorChain:
    """Kept draws and acceptance bookkeeping of one chain.

    beta is stored as (n_kept, G, N, M, K*J) with score groups g = l*R + r
    and category index k*J + j; ``beta_full`` unpacks the canonical
    (draw, j, k, l, r, s, w) layout.
    """

    beta: np.ndarray
    alpha: np.ndarray                 # (n_kept, G, KJ)
    pi: np.ndarray
    sigma: np.ndarray
    cov_params: dict
    loglik: np.ndarray
    accept_theta: np.ndarray          # (G, N, M) post-burn-in rates
    accept_alpha: np.ndarray          # (G, KJ)
    accept_pi: np.ndarray
    accept_sigma: np.ndarray
    accept_cov: float
    dims: dict
    chain_index: int = 0
    seed: int = 0
    theta: np.ndarray | None = None

    @property
    def n_kept(self) -> int:
        return self.beta.shape[0]

    def beta_full(self) -> np.ndarray:
        """Kept beta draws as (n_kept, J, K, L, R, N, M)."""
        d = self.dims
        n, L, R, N, M, K, J = (self.n_kept, d["L"], d["R"], d["N"], d["M"], d["K"], d["J"])
        arr = self.beta.reshape(n, L, R, N, M, K, J)
        return arr.transpose(0, 6, 5, 1, 2, 3, 4)

    def summary_accept(self) -> dict:
        """Overall and per-parameter-type mean acceptance rates."""
        out = {
            "theta": float(np.mean(self.accept_theta)),
            "alpha": float(np.mean(self.accept_alpha)),
            "pi": float(np.mean(self.accept_pi)),
            "sigma": float(np.mean(self.accept_sigma)),
        }
        if not np.isnan(self.accept_cov):
            out["cov"] = float(self.accept_cov)
        out["overall"] = float(np.mean([v for v in out.values()]))
        return out


def pool_chains(chains: list[PosteriorChain]) -> PosteriorChain:
    """Concatenate kept draws of several chains (for pooled summaries)."""
    first = chains[0]
    if len(chains) == 1:
        return first
    cat = lambda name: np.concatenate([getattr(c, name) for c in chains], axis=0)
    cov = {k: np.concatenate([c.cov_params[k] for c in chains]) for k in first.cov_params}
    cov_accs = np.asarray([c.accept_cov for c in chains])
    return PosteriorChain(
        beta=cat("beta"), alpha=cat("alpha"), pi=cat("pi"), sigma=cat("sigma"),
        cov_params=cov, loglik=cat("loglik"),
        accept_theta=np.mean([c.accept_theta for c in chains], axis=0),
        accept_alpha=np.mean([c.accept_alpha for c in chains], axis=0),
        accept_pi=np.mean([c.accept_pi for c in chains], axis=0),
        accept_sigma=np.mean([c.accept_sigma for c in chains], axis=0),
        accept_cov=(float(np.nanmean(cov_accs)) if np.isfinite(cov_accs).any()
                    else float("nan")),
        dims=first.dims, chain_index=-1, seed=first.seed,
    )


def loglik_full(y, beta: CoefficientField, xi: ScoreSet, variant: str) -> float:
    """Model log-likelihood: hurdle pmf for full variants, Poisson for reduced."""
    if variant in REDUCED_VARIANTS:
        return poisson_loglik(np.asarray(y), beta, xi)
    values = y.values if isinstance(y, CountField) else np.asarray(y)
    params = linear_predictors(beta, xi)
    return float(np.sum(phm_logpmf(values, params.p, params.lam)))


def _coerce_inputs(y, xi: ScoreSet, cfg: FitConfig):
    """Normalize y to (K, N, T) and scores to (G, M, T)."""
    values = y.values if isinstance(y, CountField) else np.asarray(y)
    if cfg.is_reduced:
        if values.ndim == 3:
            if values.shape[0] != 1:
                raise ValueError("reduced variants take a single-response count array")
            values = values[0]
        if values.ndim != 2:
            raise ValueError("reduced variants need counts shaped (N, T)")
        values = values[None, :, :]
        J = 1
    else:
        if values.ndim != 3:
            raise ValueError("hurdle variants need counts shaped (K, N, T)")
        J = 2
    if np.any(values < 0):
        raise ValueError("counts must be non-negative")
    xg = xi.grouped()                       # (G, M, T)
    K, N, T = values.shape
    if xg.shape[2] != T:
        raise ValueError(f"scores cover {xg.shape[2]} years but counts cover {T}")
    return values.astype(np.int64), xg, J


class _ChainState:
    """Mutable per-chain sampler state (arrays shared with the compiled scans)."""

    def __init__(self, y, xg, J, cfg: FitConfig, distances, rng):
        self.cfg = cfg
        K, N, T = y.shape
        G, M, _ = xg.shape
        self.K, self.N, self.T, self.G, self.M, self.J = K, N, T, G, M, J
        self.KJ = K * J
        self.y = y
        self.xi = np.ascontiguousarray(xg)
        self.rng = rng
        self.hurdle = 0 if cfg.is_reduced else 1
        self.distances = distances
        act_s, act_w, act_k, act_j = _ACTIVE[cfg.model_variant]
        self.active = {
            "range_km": act_s,
            "rho_t": act_w and M > 1,
            "rho_k": act_k and K > 1 and cfg.category_cov == "power",
            "rho_j": act_j and J > 1 and cfg.category_cov == "power",
        }
        self.wishart_k = act_k and K > 1 and cfg.category_cov == "wishart"
        self.wishart_j = act_j and J > 1 and cfg.category_cov == "wishart"
        if self.active["range_km"] and distances is None:
            raise ValueError(f"variant {cfg.model_variant} needs a distance matrix")

        # covariance hyperparameters drawn from their priors
        self.cov_values = {}
        lo, hi = cfg.rho_bounds
        if self.active["range_km"]:
            self.cov_values["range_km"] = rng.uniform(0.0, cfg.range_upper_km)
        for name in ("rho_t", "rho_k", "rho_j"):
            if self.active[name]:
                self.cov_values[name] = rng.uniform(lo, hi)
        self.gamma_k_fixed = wishart_correlation(K, rng) if self.wishart_k else None
        self.gamma_j_fixed = wishart_correlation(J, rng) if self.wishart_j else None
        self.cov = self._build_cov(self.cov_values, self.gamma_k_fixed, self.gamma_j_fixed)
        self.logdet = kron_logdet(self.cov)

        # marginals; sigma starts from a truncated prior draw because the
        # sigma^2 prior tail is extremely heavy and a huge initial slab scale
        # strands chains in the flat region of all-zero-count sites
        a, b = cfg.pi_prior
        self.al_a = rng.normal(0.0, cfg.alpha_sd, size=(G, self.KJ))
        self.pi_a = np.clip(rng.beta(a, b, size=(G, self.KJ)), 1e-12, 1 - 1e-12)
        if cfg.sigma_prior == "gamma_on_sigma":
            sa, sb = cfg.sigma_prior_ab
            self.si_a = rng.gamma(sa, 1.0 / sb, size=(G, self.KJ))
        else:
            sa, sb = cfg.sigma_prior_ab
            self.si_a = np.sqrt(sb / rng.gamma(sa, 1.0, size=(G, self.KJ)))
        self.si_a = np.clip(self.si_a, 0.05, 5.0)

        # latent field, precision-weighted field, coefficients
        self.theta = np.empty((G, N, M, self.KJ))
        for g in range(G):
            self.theta[g] = kron_sample(self.cov, rng).reshape(N, M, self.KJ)
        self.uprec = np.empty_like(self.theta)
        self._refresh_uprec()
        self.beta = np.empty_like(self.theta)
        self._refresh_beta()
        self.eta = np.zeros((K, J, N, T))
        self._refresh_eta()
        self.loglik = _kernels.total_loglik(self.eta, self.y, self.hurdle)

        # proposal scales and acceptance bookkeeping
        self.sd_theta = np.full((G, N, M), 0.5)
        self.sd_marg = np.full((G, self.KJ, 3), 0.5)
        self.sd_trans = np.full((G, self.KJ, 3), 0.5)
        self.sd_cov = {k: max(0.05 * (cfg.range_upper_km if k == "range_km" else 1.0), 1e-3)
                       for k in self.cov_values}
        self.post_theta_acc = np.zeros((G, N, M))
        self.post_marg_acc = np.zeros((G, self.KJ, 3))
        self.post_trans_acc = np.zeros((G, self.KJ, 3))
        self.post_n = 0
        self.cov_move_n = 0
        self._cov_accepted = False

    def _build_cov(self, values, gk_fixed, gj_fixed):
        return SeparableCovariance.from_params(
            self.distances, self.N, self.M, self.K, self.J,
            range_km=values.get("range_km"),
            rho_t=values.get("rho_t"),
            rho_k=values.get("rho_k"),
            rho_j=values.get("rho_j"),
            gamma_k=gk_fixed, gamma_j=gj_fixed,
        )

    def _refresh_uprec(self):
        # one batched solve across groups: mode-multiply along the factor axes
        from .prior import _mode_multiply
        t = self.theta.reshape((self.G, self.N, self.M, self.K, self.J))
        eigs = self.cov._eigs
        for axis, (lam, Q) in enumerate(eigs, start=1):
            t = _mode_multiply(t, Q.T, axis)
        lam_joint = np.einsum("s,w,k,j->swkj", *(lam for lam, _ in eigs))
        t = t / lam_joint[None]
        for axis, (lam, Q) in enumerate(eigs, start=1):
            t = _mode_multiply(t, Q, axis)
        self.uprec = np.ascontiguousarray(t.reshape(self.G, self.N, self.M, self.KJ))

    def _refresh_beta(self):
        for g in range(self.G):
            for a in range(self.KJ):
                th = self.theta[g, :, :, a].reshape(-1)
                out = np.empty(th.size)
                for i in range(th.size):
                    out[i] = _kernels.beta_from_theta(
                        th[i], self.pi_a[g, a], self.al_a[g, a], self.si_a[g, a], self.cfg.C)
                self.beta[g, :, :, a] = out.reshape(self.N, self.M)

    def _refresh_eta(self):
        # eta[k, j, s, t] = sum_{g, w} beta[g, s, w, k*J+j] xi[g, w, t]
        b = self.beta.reshape(self.G, self.N, self.M, self.K, self.J)
        self.eta = np.ascontiguousarray(
            np.einsum("gswkj,gwt->kjst", b, self.xi))

    def factor_inverses(self):
        s_inv, w_inv, k_inv, j_inv = self.cov.factor_inverses
        return s_inv, w_inv, np.kron(k_inv, j_inv)

    def _factor_matrices(self, values, gk_fixed, gj_fixed):
        gs = (exp_kernel(self.distances, values["range_km"])
              if "range_km" in values else np.eye(self.N))
        gw = (power_corr_matrix(self.M, values["rho_t"])
              if "rho_t" in values else np.eye(self.M))
        if gk_fixed is not None:
            gk = gk_fixed
        else:
            gk = (power_corr_matrix(self.K, values["rho_k"])
                  if "rho_k" in values else np.eye(self.K))
        if gj_fixed is not None:
            gj = gj_fixed
        else:
            gj = (power_corr_matrix(self.J, values["rho_j"])
                  if "rho_j" in values else np.eye(self.J))
        return [gs, gw, gk, gj]

    def _proposal_logdet_quad(self, mats):
        """Cheap Cholesky evaluation of the proposed theta-prior pieces.

        Returns (per-group logdet, total quadratic form over groups), or
        None when a factor is not positive definite.
        """
        dims = (self.N, self.M, self.K, self.J)
        total = self.N * self.M * self.K * self.J
        chols = []
        logdet = 0.0
        for mat, d in zip(mats, dims):
            if d == 1:
                chols.append(None)
                continue
            try:
                L = np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                return None
            if np.min(np.diag(L)) ** 2 <= 1e-12:
                return None
            chols.append(L)
            logdet += (total // d) * 2.0 * float(np.sum(np.log(np.diag(L))))
        t = self.theta.reshape((self.G,) + dims)
        for axis, L in enumerate(chols, start=1):
            if L is None:
                continue
            moved = np.moveaxis(t, axis, 0)
            shape = moved.shape
            solved = cho_solve((L, True), moved.reshape(shape[0], -1))
            t = np.moveaxis(solved.reshape(shape), 0, axis)
        quad = float(np.sum(self.theta.reshape((self.G,) + dims) * t))
        return logdet, quad

    def cov_step(self):
        """Joint MH move of the covariance hyperparameters (theta-prior only)."""
        if not self.cov_values and not (self.wishart_k or self.wishart_j):
            return
        rng = self.rng
        cfg = self.cfg
        prop = {}
        lo, hi = cfg.rho_bounds
        for name, val in self.cov_values.items():
            p = val + self.sd_cov[name] * rng.normal()
            upper = cfg.range_upper_km if name == "range_km" else hi
            lower = 0.0 if name == "range_km" else lo
            if not (lower < p < upper):
                self.cov_move_n += 1
                return                        # outside the uniform prior support
            prop[name] = p
        gk = wishart_correlation(self.K, rng) if self.wishart_k else self.gamma_k_fixed
        gj = wishart_correlation(self.J, rng) if self.wishart_j else self.gamma_j_fixed
        self.cov_move_n += 1
        mats = self._factor_matrices(prop, gk, gj)
        evaluated = self._proposal_logdet_quad(mats)
        if evaluated is None:
            return
        logdet_p, quad_p = evaluated
        quad_c = float(np.sum(self.theta * self.uprec))
        lr = -0.5 * ((quad_p - quad_c) + self.G * (logdet_p - self.logdet))
        if math.log(rng.random()) < lr:
            try:
                cov_new = SeparableCovariance(*mats)
            except ValueError:               # borderline eigenvalue; treat as reject
                return
            self.cov_values = prop
            self.gamma_k_fixed, self.gamma_j_fixed = gk, gj
            self.cov = cov_new
            self.logdet = logdet_p
            self._refresh_uprec()
            self._cov_accepted = True

    def cov_snapshot(self):
        return dict(self.cov_values)


def _record_shapes(cfg: FitConfig, st: _ChainState):
    n = cfg.n_kept
    rec = {
        "beta": np.empty((n, st.G, st.N, st.M, st.KJ)),
        "alpha": np.empty((n, st.G, st.KJ)),
        "pi": np.empty((n, st.G, st.KJ)),
        "sigma": np.empty((n, st.G, st.KJ)),
        "loglik": np.empty(n),
        "cov": {k: np.empty(n) for k in st.cov_values},
    }
    if cfg.save_theta:
        rec["theta"] = np.empty((n, st.G, st.N, st.M, st.KJ))
    return rec


def _run_chain(y, xg, J, cfg: FitConfig, distances, chain_index: int,
               dims_meta: dict) -> PosteriorChain:
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0x5A11, chain_index))))
    st = _ChainState(y, xg, J, cfg, distances, rng)
    G, N, M, KJ = st.G, st.N, st.M, st.KJ
    rec = _record_shapes(cfg, st)
    log_ratios = np.empty((G, N, M))
    accepts = np.zeros((G, N, M), dtype=np.uint8)
    log_ratios3 = np.empty((G, KJ, 3))
    accepts3 = np.zeros((G, KJ, 3), dtype=np.uint8)
    log_ratios_t = np.empty((G, KJ, 3))
    accepts_t = np.zeros((G, KJ, 3), dtype=np.uint8)
    s_inv, w_inv, kj_inv = st.factor_inverses()
    kept = 0
    cov_acc_count = 0.0
    for it in range(cfg.n_iter):
        z_prop = rng.standard_normal((G, N, M, KJ))
        u_acc = rng.random((G, N, M))
        dll = _kernels.theta_scan(
            st.theta, st.beta, st.uprec, st.eta, st.y, st.xi,
            s_inv, w_inv, kj_inv,
            st.pi_a, st.al_a, st.si_a, cfg.C,
            st.sd_theta, z_prop, u_acc, st.hurdle,
            log_ratios, accepts)
        st.loglik += dll
        z3 = rng.standard_normal((G, KJ, 3))
        u3 = rng.random((G, KJ, 3))
        sig_kind = 0 if cfg.sigma_prior == "gamma_on_sigma" else 1
        dll = _kernels.marginal_scan(
            st.theta, st.beta, st.eta, st.y, st.xi,
            st.pi_a, st.al_a, st.si_a, cfg.C,
            cfg.alpha_sd, cfg.pi_prior[0], cfg.pi_prior[1],
            sig_kind, cfg.sigma_prior_ab[0], cfg.sigma_prior_ab[1],
            st.sd_marg, z3, u3, st.hurdle,
            log_ratios3, accepts3)
        st.loglik += dll
        # interweaved marginal moves that hold beta (and the likelihood) fixed
        zt = rng.standard_normal((G, KJ, 3))
        ut = rng.random((G, KJ, 3))
        _kernels.transport_scan(
            st.theta, st.beta, st.uprec,
            s_inv, w_inv, kj_inv,
            st.pi_a, st.al_a, st.si_a, cfg.C,
            cfg.alpha_sd, cfg.pi_prior[0], cfg.pi_prior[1],
            sig_kind, cfg.sigma_prior_ab[0], cfg.sigma_prior_ab[1],
            st.sd_trans, zt, ut,
            log_ratios_t, accepts_t)
        st._cov_accepted = False
        moved_before = st.cov_move_n
        st.cov_step()
        if st._cov_accepted:
            s_inv, w_inv, kj_inv = st.factor_inverses()

        if it < cfg.n_burn:
            st.sd_theta = adapt_step(st.sd_theta, accepts, cfg.target_accept, it)
            st.sd_marg = adapt_step(st.sd_marg, accepts3, cfg.target_accept, it)
            st.sd_trans = adapt_step(st.sd_trans, accepts_t, cfg.target_accept, it)
            if st.cov_move_n > moved_before:
                accepted = 1.0 if st._cov_accepted else 0.0
                for kname in st.sd_cov:
                    st.sd_cov[kname] = adapt_step(st.sd_cov[kname], accepted,
                                                  cfg.target_accept, it)
        else:
            st.post_theta_acc += accepts
            st.post_marg_acc += accepts3
            st.post_trans_acc += accepts_t
            if st.cov_move_n > moved_before:
                cov_acc_count += 1.0 if st._cov_accepted else 0.0
            st.post_n += 1

        if (it + 1) % 1000 == 0:
            # guard against float drift in the maintained quantities
            st._refresh_uprec()
            st._refresh_beta()
            st._refresh_eta()
            st.loglik = _kernels.total_loglik(st.eta, st.y, st.hurdle)
            if cfg.progress:
                print(f"[hss chain {chain_index}] iter {it + 1}/{cfg.n_iter} "
                      f"loglik {st.loglik:.3f}", file=sys.stderr, flush=True)

        if it >= cfg.n_burn and (it - cfg.n_burn + 1) % cfg.thin == 0 and kept < cfg.n_kept:
            rec["beta"][kept] = st.beta
            rec["alpha"][kept] = st.al_a
            rec["pi"][kept] = st.pi_a
            rec["sigma"][kept] = st.si_a
            rec["loglik"][kept] = st.loglik
            for kname in rec["cov"]:
                rec["cov"][kname][kept] = st.cov_values[kname]
            if cfg.save_theta:
                rec["theta"][kept] = st.theta
            kept += 1

    denom = max(st.post_n, 1)
    marg_acc = 0.5 * (st.post_marg_acc + st.post_trans_acc) / denom
    return PosteriorChain(
        beta=rec["beta"], alpha=rec["alpha"], pi=rec["pi"], sigma=rec["sigma"],
        cov_params=rec["cov"], loglik=rec["loglik"],
        accept_theta=st.post_theta_acc / denom,
        accept_alpha=marg_acc[:, :, 0],
        accept_pi=marg_acc[:, :, 1],
        accept_sigma=marg_acc[:, :, 2],
        accept_cov=(cov_acc_count / denom) if st.cov_values else float("nan"),
        dims=dims_meta, chain_index=chain_index, seed=cfg.seed,
        theta=rec.get("theta"),
    )


def fit(y, xi: ScoreSet, cfg: FitConfig, distances=None,
        chains=None) -> list[PosteriorChain]:
    """Run the Metropolis-within-Gibbs sampler; one PosteriorChain per chain.

    y is a CountField (or (K, N, T) array) for hurdle variants, or an
    (N, T) count array for the reduced variants. Zero-length year axes are
    allowed and sample from the prior. ``distances`` supplies the spatial
    factor's pairwise km matrix for variants with a free range. ``chains``
    selects specific chain indices (for external parallel dispatch); each
    chain's stream depends only on (seed, index), so splitting the indices
    across workers reproduces the sequential result.
    """
    values, xg, J = _coerce_inputs(y, xi, cfg)
    K, N, T = values.shape
    L, R = xi.xi.shape[0], xi.xi.shape[1]
    M = xi.xi.shape[3]
    if distances is not None:
        distances = np.asarray(distances, dtype=float)
        if distances.shape != (N, N):
            raise ValueError(f"distance matrix must be ({N}, {N})")
    dims_meta = {"N": N, "M": M, "K": K, "J": J, "L": L, "R": R, "T": T,
                 "G": L * R, "variant": cfg.model_variant}
    if chains is None:
        chains = range(cfg.n_chains)
    return [_run_chain(values, xg, J, cfg, distances, c, dims_meta)
            for c in chains]
