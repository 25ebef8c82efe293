"""Seasonal storm-count modeling: hurdle likelihoods with copula spike-and-slab selection."""

__version__ = "0.1.0"

from .core import AnomalyField, CountField, GridSpec, IndexMap, build_grid, distance
from .eof import EofBasis, ScoreSet, eof_decompose, reconstruct
from .ingest import CovariateSeries, TrackFix, classify_strength, compute_anomalies, count_tracks, trimester_average
from .likelihood import CoefficientField, HurdleParams, linear_predictors, phm_logpmf, phm_mean, phm_simulate, poisson_loglik
from .prior import (SeparableCovariance, SpikeSlabMarginal, ar1_kernel, copula_transform,
                    exp_kernel, kron_logdet, kron_sample, kron_solve, mixture_cdf,
                    mixture_quantile, ordered_kernel)
from .sampler import FitConfig, PosteriorChain, adapt_step, fit, loglik_full, pool_chains
from .simstudy import SettingSpec, StudyReport, generate_beta, generate_response, generate_scores, run_study
from .analysis import CredibleSummary, dic, mad_statistic, mse, significant_factors, summarize, zero_detection
