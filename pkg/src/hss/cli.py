"""Batch command line: ingest -> eof -> fit plus the replicate study and metric evaluation."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__, analysis, eof, ingest, simstudy
from .core import read_grid_csv, write_grid_csv
from .sampler import FitConfig, fit, pool_chains

log = logging.getLogger("hss")


class UsageError(Exception):
    """Bad invocation, file schema, or configuration; exits with code 2."""


# configuration keys shared by the config file and the flag overrides
CONFIG_KEYS = {
    "n_iter": int, "n_burn": int, "thin": int, "seed": int, "n_chains": int,
    "model": str, "c": float, "alpha_sd": float, "sigma_prior": str,
    "range_upper_km": float, "target_accept": float, "category_cov": str,
    "pi_a": float, "pi_b": float, "threshold": float, "fixed_r": int,
    "jobs": int, "save_beta_draws": int,
}


def parse_config_file(path) -> dict:
    """Flat key=value lines; blank lines and # comments ignored."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                out[key] = CONFIG_KEYS[key](val) if val.lower() != "inf" else float("inf")
            except ValueError as e:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {e}") from e
    return out


def resolve_config(args, defaults=None) -> dict:
    """Config file values, overridden by explicit command-line flags."""
    conf = dict(defaults or {})
    if getattr(args, "config", None):
        conf.update(parse_config_file(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = val
    return conf


def build_fit_config(conf: dict, model: str) -> FitConfig:
    kwargs = dict(model_variant=model)
    mapping = {"n_iter": "n_iter", "n_burn": "n_burn", "thin": "thin", "seed": "seed",
               "n_chains": "n_chains", "c": "C", "alpha_sd": "alpha_sd",
               "sigma_prior": "sigma_prior", "range_upper_km": "range_upper_km",
               "target_accept": "target_accept", "category_cov": "category_cov"}
    for key, attr in mapping.items():
        if key in conf:
            kwargs[attr] = conf[key]
    if "pi_a" in conf or "pi_b" in conf:
        kwargs["pi_prior"] = (conf.get("pi_a", 1.0), conf.get("pi_b", 1.0))
    try:
        return FitConfig(**kwargs)
    except ValueError as e:
        raise UsageError(f"invalid configuration: {e}") from e


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, command, config, seed, inputs, t_start):
    manifest = {
        "command": command,
        "config": {k: (repr(v) if isinstance(v, float) else v) for k, v in sorted(config.items())},
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "tool_version": __version__,
        "wall_clock_s": round(time.time() - t_start, 3),
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _require(path, what):
    if not os.path.exists(path):
        raise UsageError(f"{what} file not found: {path}")
    return path


# -- ingest ------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    t0 = time.time()
    _require(args.tracks, "tracks")
    _require(args.covariates, "covariates")
    os.makedirs(args.out, exist_ok=True)
    from .core import build_grid
    try:
        grid = build_grid(args.lat_min, args.lat_max, args.lon_min, args.lon_max, args.cell_size)
    except ValueError as e:
        raise UsageError(str(e)) from e

    if args.track_format == "hurdat2":
        with open(args.tracks, encoding="utf-8") as f:
            fixes = ingest.parse_hurdat2(f)
    else:
        try:
            fixes = ingest.read_tracks_csv(args.tracks)
        except ValueError as e:
            raise UsageError(str(e)) from e
    if not fixes:
        log.warning("no track fixes found in %s; counts will be all zero", args.tracks)

    try:
        series = ingest.read_covariates_csv(args.covariates)
    except ValueError as e:
        raise UsageError(str(e)) from e
    tri = [ingest.trimester_average(s) if s.resolution == "daily" else s for s in series]
    fields = [ingest.compute_anomalies(s) for s in tri]
    anoms = ingest.stack_anomalies(fields)
    mask = ingest.coverage_mask(fields)
    if mask.size != grid.n_boxes:
        # covariate files may omit trailing boxes entirely
        full = np.zeros(grid.n_boxes, dtype=bool)
        full[:mask.size] = mask
        mask = full
    grid = grid.with_valid(mask)

    counts = ingest.count_tracks(fixes, grid, years=anoms.years,
                                 classification=args.classification)
    ingest.write_counts_csv(counts, os.path.join(args.out, "counts.csv"))
    ingest.write_anomalies_csv(anoms, os.path.join(args.out, "anomalies.csv"))
    write_grid_csv(grid, os.path.join(args.out, "grid.csv"))
    write_manifest(args.out, "ingest",
                   {"lat_min": args.lat_min, "lat_max": args.lat_max,
                    "lon_min": args.lon_min, "lon_max": args.lon_max,
                    "cell_size": args.cell_size, "classification": args.classification,
                    "track_format": args.track_format},
                   seed=None, inputs=[args.tracks, args.covariates], t_start=t0)
    log.info("ingest: %d boxes (%d valid), %d fixes, years %d-%d",
             grid.n_boxes, int(mask.sum()), len(fixes),
             int(anoms.years[0]), int(anoms.years[-1]))
    return 0


# -- eof ---------------------------------------------------------------------------

def cmd_eof(args) -> int:
    t0 = time.time()
    _require(args.anomalies, "anomalies")
    os.makedirs(args.out, exist_ok=True)
    conf = resolve_config(args)
    threshold = conf.get("threshold", 0.70)
    fixed_r = conf.get("fixed_r")
    try:
        anoms = ingest.read_anomalies_csv(args.anomalies)
    except ValueError as e:
        raise UsageError(str(e)) from e
    valid = np.isfinite(anoms.values).all(axis=(0, 2, 3))
    try:
        bases, scores = eof.decompose_field(anoms, threshold=threshold,
                                            fixed_r=fixed_r, valid=valid)
    except ValueError as e:
        raise UsageError(str(e)) from e
    for (var, w), b in bases.items():
        log.info("eof %s w=%d: rank %d, residual variance fraction %.4f",
                 var, w, b.rank, b.residual_variance_fraction)
    eof.write_scores_csv(scores, anoms.years, os.path.join(args.out, "scores.csv"))
    eof.write_eofs_csv(bases, os.path.join(args.out, "eofs.csv"))
    write_manifest(args.out, "eof", {"threshold": threshold, "fixed_r": fixed_r},
                   seed=None, inputs=[args.anomalies], t_start=t0)
    return 0


# -- fit ---------------------------------------------------------------------------

def _summary_rows(chain, dims):
    """Long-format posterior summary rows for every sampled quantity."""
    L, R, K, J = dims["L"], dims["R"], dims["K"], dims["J"]
    N, M = dims["N"], dims["M"]
    rows = []
    beta = chain.beta            # (n, G, N, M, KJ)
    summ = analysis.summarize(beta)
    acc_theta = chain.accept_theta
    for g in range(dims["G"]):
        l, r = divmod(g, R)
        for a in range(K * J):
            k, j = divmod(a, J)
            for s in range(N):
                for w in range(M):
                    rows.append(["beta", j + 1, k + 1, g + 1, s * M + w + 1,
                                 summ.median[g, s, w, a], summ.mean[g, s, w, a],
                                 summ.lo[g, s, w, a], summ.hi[g, s, w, a],
                                 acc_theta[g, s, w]])
    for name, draws, acc in (("alpha", chain.alpha, chain.accept_alpha),
                             ("pi", chain.pi, chain.accept_pi),
                             ("sigma", chain.sigma, chain.accept_sigma)):
        s2 = analysis.summarize(draws)
        for g in range(dims["G"]):
            l, r = divmod(g, R)
            for a in range(K * J):
                k, j = divmod(a, J)
                rows.append([name, j + 1, k + 1, l + 1, r + 1,
                             s2.median[g, a], s2.mean[g, a], s2.lo[g, a], s2.hi[g, a],
                             acc[g, a]])
    for name, draws in chain.cov_params.items():
        s3 = analysis.summarize(draws[:, None])
        rows.append([name, "", "", "", "", s3.median[0], s3.mean[0], s3.lo[0], s3.hi[0],
                     chain.accept_cov])
    return rows


def _write_summary_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["param", "index1", "index2", "index3", "index4",
                    "median", "mean", "lo2_5", "hi97_5", "accept_rate"])
        for row in rows:
            w.writerow([x if isinstance(x, (str, int)) else repr(float(x)) for x in row])


def _write_chains_csv(chains, cfg, dims, path, save_beta):
    R, K, J, M = dims["R"], dims["K"], dims["J"], dims["M"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["chain", "iteration", "param", "index1", "index2", "index3", "index4", "value"])
        for chain in chains:
            iters = [cfg.n_burn + (i + 1) * cfg.thin for i in range(chain.n_kept)]
            for i, itn in enumerate(iters):
                for name, draws in (("alpha", chain.alpha), ("pi", chain.pi),
                                    ("sigma", chain.sigma)):
                    for g in range(dims["G"]):
                        l, r = divmod(g, R)
                        for a in range(K * J):
                            k, j = divmod(a, J)
                            w.writerow([chain.chain_index, itn, name, j + 1, k + 1,
                                        l + 1, r + 1, repr(float(draws[i, g, a]))])
                for name, vals in chain.cov_params.items():
                    w.writerow([chain.chain_index, itn, name, "", "", "", "",
                                repr(float(vals[i]))])
                w.writerow([chain.chain_index, itn, "loglik", "", "", "", "",
                            repr(float(chain.loglik[i]))])
                if save_beta:
                    for g in range(dims["G"]):
                        for a in range(K * J):
                            k, j = divmod(a, J)
                            flat = chain.beta[i, g, :, :, a].reshape(-1)
                            for sw, val in enumerate(flat):
                                w.writerow([chain.chain_index, itn, "beta", j + 1, k + 1,
                                            g + 1, sw + 1, repr(float(val))])


def _write_factors_csv(chain, dims, variables, path, threshold=0.10):
    summ = analysis.summarize(chain.beta)     # arrays (G, N, M, KJ)
    R, K, J, M = dims["R"], dims["K"], dims["J"], dims["M"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["response", "level", "variable", "score", "trimester",
                    "fraction", "direction", "flagged", "magnitude"])
        for g in range(dims["G"]):
            l, r = divmod(g, R)
            var = variables[l] if l < len(variables) else str(l + 1)
            for a in range(K * J):
                k, j = divmod(a, J)
                recs = analysis.significant_factors(
                    summ.lo[g, :, :, a][None], summ.hi[g, :, :, a][None],
                    summ.median[g, :, :, a][None], threshold=threshold)
                for rec in recs:
                    w.writerow([k + 1, j + 1, var, r + 1, rec["trimester"],
                                repr(rec["fraction"]), rec["direction"],
                                int(rec["flagged"]), repr(rec["magnitude"])])


def _run_single_chain(payload):
    values, xi, cfg, distances, c = payload
    return fit(values, xi, replace(cfg, n_chains=cfg.n_chains), distances=distances,
               chains=[c])[0]


def cmd_fit(args) -> int:
    t0 = time.time()
    _require(args.counts, "counts")
    _require(args.scores, "scores")
    conf = resolve_config(args)
    model = conf.get("model", "ST")
    cfg = build_fit_config(conf, model)
    try:
        counts = ingest.read_counts_csv(args.counts)
        xi = eof.read_scores_csv(args.scores)
    except ValueError as e:
        raise UsageError(str(e)) from e

    distances = None
    valid = None
    if args.grid:
        grid = read_grid_csv(_require(args.grid, "grid"))
        valid = grid.valid
        if counts.n_boxes != grid.n_boxes:
            raise UsageError(f"counts cover {counts.n_boxes} boxes but grid has {grid.n_boxes}")
        distances = grid.distance_matrix[np.ix_(valid, valid)]
        values = counts.values[:, valid, :]
    else:
        values = counts.values
    if cfg.model_variant not in ("IN", "M1") and distances is None:
        raise UsageError(f"model {cfg.model_variant} needs --grid for spatial distances")
    if cfg.is_reduced:
        if values.shape[0] != 1:
            raise UsageError("reduced models need single-strength counts")
        values = values[0]

    if args.dry_run:
        resolved = {"model": cfg.model_variant, "n_iter": cfg.n_iter, "n_burn": cfg.n_burn,
                    "thin": cfg.thin, "seed": cfg.seed, "n_chains": cfg.n_chains,
                    "C": cfg.C, "alpha_sd": cfg.alpha_sd, "sigma_prior": cfg.sigma_prior,
                    "range_upper_km": cfg.range_upper_km, "target_accept": cfg.target_accept,
                    "category_cov": cfg.category_cov}
        print(json.dumps(resolved, indent=2, sort_keys=True, default=repr))
        return 0

    os.makedirs(args.out, exist_ok=True)
    jobs = conf.get("jobs", int(os.environ.get("HSS_JOBS", "1")))
    if jobs > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chains = list(ex.map(_run_single_chain,
                                 [(values, xi, cfg, distances, c)
                                  for c in range(cfg.n_chains)]))
    else:
        chains = fit(values, xi, cfg, distances=distances)
    dims = chains[0].dims
    pooled = pool_chains(chains)

    _write_chains_csv(chains, cfg, dims, os.path.join(args.out, "chains.csv"),
                      save_beta=bool(conf.get("save_beta_draws", 0)))
    _write_summary_csv(_summary_rows(pooled, dims), os.path.join(args.out, "summary.csv"))
    _write_factors_csv(pooled, dims, xi.variables, os.path.join(args.out, "factors.csv"))
    val = analysis.dic(pooled, values, xi)
    pbar, lam_bar = analysis._predictor_means(pooled, xi)
    rmse = analysis.response_mse(values, pbar, lam_bar)
    with open(os.path.join(args.out, "dic.txt"), "w", encoding="utf-8") as f:
        f.write(f"DIC {val!r}\nMSE {rmse!r}\n")
    inputs = [args.counts, args.scores] + ([args.grid] if args.grid else []) \
        + ([args.config] if args.config else [])
    write_manifest(args.out, "fit",
                   {**conf, "model": cfg.model_variant, "n_iter": cfg.n_iter,
                    "n_burn": cfg.n_burn, "thin": cfg.thin, "C": cfg.C},
                   seed=cfg.seed, inputs=inputs, t_start=t0)
    log.info("fit: %s model, %d chains x %d kept draws, DIC %.3f",
             cfg.model_variant, len(chains), chains[0].n_kept, val)
    return 0


# -- study -------------------------------------------------------------------------

def cmd_study(args) -> int:
    t0 = time.time()
    conf = resolve_config(args)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for m in models:
        if m not in ("M1", "M2", "M3"):
            raise UsageError(f"unknown study model {m!r} (expected M1, M2, M3)")
    if args.setting not in (1, 2, 3):
        raise UsageError("setting must be 1, 2, or 3")
    os.makedirs(args.out, exist_ok=True)
    spec = simstudy.SettingSpec.preset(args.setting, B=args.B)
    base = {"model_variant": "M3", "C": float("inf"), "progress": False}
    for key, attr in (("n_iter", "n_iter"), ("n_burn", "n_burn"), ("thin", "thin"),
                      ("c", "C"), ("target_accept", "target_accept")):
        if key in conf:
            base[attr] = conf[key]
    cfg = FitConfig(**base)
    seed = conf.get("seed", 0)
    jobs = conf.get("jobs", int(os.environ.get("HSS_JOBS", "1")))
    report = simstudy.run_study(spec, models, cfg, B=args.B, seed=seed, jobs=jobs)
    simstudy.write_study_csv(report, os.path.join(args.out, "study_report.csv"))
    simstudy.write_table_csv(report, os.path.join(args.out, "table2_like.csv"))
    inputs = [args.config] if args.config else []
    write_manifest(args.out, "study",
                   {**conf, "setting": args.setting, "models": ",".join(models), "B": args.B},
                   seed=seed, inputs=inputs, t_start=t0)
    return 0


# -- evaluate ----------------------------------------------------------------------

def read_truth_csv(path):
    """Truth CSV for the reduced study: component,box_id,trimester,value."""
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.DictReader(f)
        for lineno, row in enumerate(r, start=2):
            try:
                rows.append((int(row["component"]), int(row["box_id"]),
                             int(row["trimester"]), float(row["value"])))
            except (KeyError, TypeError, ValueError) as e:
                raise UsageError(f"{path}: bad truth row at line {lineno}: {e}") from e
    if not rows:
        raise UsageError(f"{path}: empty truth file")
    A = max(r[0] for r in rows)
    N = max(r[1] for r in rows) + 1
    M = max(r[2] for r in rows)
    out = np.full((A, N, M), np.nan)
    for a, s, w, v in rows:
        out[a - 1, s, w - 1] = v
    if not np.isfinite(out).all():
        raise UsageError(f"{path}: truth table has holes")
    return out


def write_truth_csv(beta, path):
    beta = np.asarray(beta, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["component", "box_id", "trimester", "value"])
        A, N, M = beta.shape
        for a in range(A):
            for s in range(N):
                for wi in range(M):
                    w.writerow([a + 1, s, wi + 1, repr(float(beta[a, s, wi]))])


def read_summary_beta(path):
    """Posterior beta summaries back from a summary.csv (reduced, single response)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.DictReader(f)
        for row in r:
            if row["param"] != "beta":
                continue
            rows.append((int(row["index3"]), int(row["index4"]),
                         float(row["median"]), float(row["lo2_5"]), float(row["hi97_5"])))
    if not rows:
        raise UsageError(f"{path}: no beta rows in summary")
    A = max(r[0] for r in rows)
    SW = max(r[1] for r in rows)
    med = np.full((A, SW), np.nan)
    lo = np.full((A, SW), np.nan)
    hi = np.full((A, SW), np.nan)
    for g, sw, m, l, h in rows:
        med[g - 1, sw - 1] = m
        lo[g - 1, sw - 1] = l
        hi[g - 1, sw - 1] = h
    return med, lo, hi


def cmd_evaluate(args) -> int:
    t0 = time.time()
    _require(args.summary, "summary")
    os.makedirs(args.out, exist_ok=True)
    med, lo, hi = read_summary_beta(args.summary)
    rows = []
    if args.truth:
        truth = read_truth_csv(_require(args.truth, "truth"))
        A, N, M = truth.shape
        if med.shape != (A, N * M):
            raise UsageError(f"summary covers {med.shape} but truth is {(A, N * M)}")
        tr = truth.reshape(A, N * M)
        for a in range(A):
            rows.append(["mad", a + 1, analysis.mad_statistic(med[a], tr[a])])
            rows.append(["zero_prop", a + 1, analysis.zero_detection(lo[a], hi[a], tr[a])])
            rows.append(["mse_beta_median", a + 1, analysis.mse(med[a], tr[a])])
    sig = (lo > 0) | (hi < 0)
    for a in range(med.shape[0]):
        rows.append(["significant_fraction", a + 1, float(np.mean(sig[a]))])
    with open(os.path.join(args.out, "metrics.csv"), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["stat", "component", "value"])
        for row in rows:
            w.writerow([row[0], row[1], repr(float(row[2]))])
    inputs = [args.summary] + ([args.truth] if args.truth else [])
    write_manifest(args.out, "evaluate", {"threshold": args.threshold},
                   seed=None, inputs=inputs, t_start=t0)
    return 0


# -- parser ------------------------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--n-iter", dest="n_iter", type=int)
    p.add_argument("--n-burn", dest="n_burn", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-chains", dest="n_chains", type=int)
    p.add_argument("--c", dest="c", type=float)
    p.add_argument("--alpha-sd", dest="alpha_sd", type=float)
    p.add_argument("--sigma-prior", dest="sigma_prior",
                   choices=["gamma_on_sigma", "invgamma_on_sigma2"])
    p.add_argument("--range-upper-km", dest="range_upper_km", type=float)
    p.add_argument("--target-accept", dest="target_accept", type=float)
    p.add_argument("--category-cov", dest="category_cov", choices=["power", "wishart"])
    p.add_argument("--jobs", type=int)
    p.add_argument("--save-beta-draws", dest="save_beta_draws", type=int)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hss", description=__doc__)
    p.add_argument("--version", action="version", version=f"hss {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("ingest", help="tracks + covariates -> counts, anomalies, grid")
    pi.add_argument("--tracks", required=True)
    pi.add_argument("--covariates", required=True)
    pi.add_argument("--lat-min", dest="lat_min", type=float, required=True)
    pi.add_argument("--lat-max", dest="lat_max", type=float, required=True)
    pi.add_argument("--lon-min", dest="lon_min", type=float, required=True)
    pi.add_argument("--lon-max", dest="lon_max", type=float, required=True)
    pi.add_argument("--cell-size", dest="cell_size", type=float, default=2.5)
    pi.add_argument("--track-format", dest="track_format", choices=["csv", "hurdat2"],
                    default="csv")
    pi.add_argument("--classification", choices=["per_box", "lifetime_max"],
                    default="per_box")
    pi.add_argument("--out", required=True)
    pi.set_defaults(func=cmd_ingest)

    pe = sub.add_parser("eof", help="anomalies -> scores and spatial maps")
    pe.add_argument("--anomalies", required=True)
    pe.add_argument("--threshold", type=float)
    pe.add_argument("--fixed-r", dest="fixed_r", type=int)
    pe.add_argument("--config")
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_eof)

    pf = sub.add_parser("fit", help="counts + scores -> posterior chains and summaries")
    pf.add_argument("--counts", required=True)
    pf.add_argument("--scores", required=True)
    pf.add_argument("--grid")
    pf.add_argument("--model", dest="model", choices=["IN", "SP", "ST", "M1", "M2", "M3"])
    pf.add_argument("--dry-run", dest="dry_run", action="store_true")
    pf.add_argument("--out", required=True)
    _add_config_flags(pf)
    pf.set_defaults(func=cmd_fit)

    ps = sub.add_parser("study", help="replicate simulation study over models")
    ps.add_argument("--setting", type=int, required=True)
    ps.add_argument("--models", default="M1,M2,M3")
    ps.add_argument("--B", type=int, default=50)
    ps.add_argument("--out", required=True)
    _add_config_flags(ps)
    ps.set_defaults(func=cmd_study)

    pv = sub.add_parser("evaluate", help="metrics from a fit summary (optionally vs truth)")
    pv.add_argument("--summary", required=True)
    pv.add_argument("--truth")
    pv.add_argument("--threshold", type=float, default=0.10)
    pv.add_argument("--out", required=True)
    pv.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:                     # runtime or numerical failure
        log.exception("command failed: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
