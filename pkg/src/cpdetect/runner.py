"""End-to-end orchestration: ingest, fill, recurse, search, refine, emit.

The result document is a single JSON object carrying the fully resolved
configuration, marginal likelihoods and posterior over the number of
changepoints, detected positions before and after refinement, per-segment
summaries and phase timings. Re-running the same configuration produces a
byte-identical document except for the ``timings`` block.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .core import KPrior, build_reduced_grid
from .gmrf import (
    GammaPrior,
    GmrfMarginalProvider,
    HyperGrid,
    LatentSpec,
    NormalPrior,
    ObsSpec,
    latent_field_mode_given_changepoints,
)
from .ingest import IngestedData, read_series
from .recursions import (
    ChangepointResult,
    backward_recursions,
    bayes_factor,
    fill_segment_table,
    log_marginals_all_k,
    map_positions,
    posterior_over_k,
    refine_positions,
    sample_positions,
)
from .segmodels import (
    GaussianConjugateModel,
    MultinomialDirichletModel,
    PoissonGammaModel,
)
from .simulate import RNG_ID

__all__ = ["run_detect", "run_bayes_factor", "build_provider", "effective_workers"]


def effective_workers(config: RunConfig) -> int:
    """Worker count, overridable through the CPDETECT_WORKERS variable."""
    env = os.environ.get("CPDETECT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CPDETECT_WORKERS must be an integer, got {env!r}")
    return config.workers


@dataclass
class PreparedData:
    raw: IngestedData
    values: np.ndarray
    scale: float
    sha256: str


def _prepare_data(config: RunConfig) -> PreparedData:
    data = read_series(config.data_path, config.data_format)
    digest = hashlib.sha256(np.ascontiguousarray(data.values).tobytes()).hexdigest()
    values = np.asarray(data.values, dtype=float)
    scale = 1.0
    if config.scaling_enabled:
        if data.kind != "numeric":
            raise ConfigError("scaling only applies to numeric series")
        sd = float(values.std(ddof=1))
        if sd > 0:
            scale = sd
            values = values / sd
    return PreparedData(raw=data, values=values, scale=scale, sha256=digest)


def build_provider(config: RunConfig, prepared: PreparedData):
    kind = config.model_kind
    values = prepared.values
    if kind == "multinomial-dirichlet":
        if prepared.raw.kind != "dna":
            raise ConfigError("multinomial-dirichlet requires fasta data")
        return MultinomialDirichletModel.from_codes(prepared.raw.values, alpha=config.alpha)
    if kind == "gaussian-conjugate":
        return GaussianConjugateModel.from_series(
            values,
            m0=config.prior_mean,
            kappa0=config.prior_kappa,
            a0=config.prior_shape,
            b0=config.prior_rate,
        )
    if kind == "poisson-gamma":
        return PoissonGammaModel.from_counts(
            prepared.raw.values, shape=config.prior_shape, rate=config.prior_rate
        )
    # gmrf
    latent = LatentSpec(
        kind=config.latent_kind,
        precision_prior=GammaPrior(config.latent_prec_shape, config.latent_prec_rate),
        kappa_prior=NormalPrior(config.kappa_mean, config.kappa_sd)
        if config.latent_kind == "ar1"
        else None,
        anchor_sd=config.anchor_sd,
        intercept=NormalPrior(config.intercept_mean, config.intercept_sd)
        if config.intercept_enabled
        else None,
    )
    obs = ObsSpec(
        kind=config.obs_kind,
        noise_precision_prior=GammaPrior(config.noise_prec_shape, config.noise_prec_rate)
        if config.obs_kind == "gaussian-identity"
        else None,
    )
    grid = HyperGrid.build(latent, obs, nodes_per_dim=config.hyper_nodes)
    series = prepared.raw.values if config.obs_kind == "poisson-log" else values
    return GmrfMarginalProvider(series, latent, obs, grid)


def _analyze(config: RunConfig, prepared: PreparedData):
    """Shared fill + recursion phase used by detect and model comparison."""
    provider = build_provider(config, prepared)
    n = provider.n
    grid = build_reduced_grid(n, config.grid_g)
    timings = {}
    t0 = time.perf_counter()
    table = fill_segment_table(provider, grid, workers=effective_workers(config))
    timings["fill_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    rec = backward_recursions(table, config.k_max)
    log_marg = log_marginals_all_k(rec, table)
    timings["recursions_s"] = time.perf_counter() - t0
    return provider, grid, table, rec, log_marg, timings


def run_detect(config: RunConfig):
    """Full detection pipeline; returns (document, ChangepointResult)."""
    prepared = _prepare_data(config)
    provider, grid, table, rec, log_marg, timings = _analyze(config, prepared)
    kprior = KPrior(config.k_prior_kind, config.k_max, config.k_prior_mean)
    log_prior = kprior.log_weights()
    posterior = posterior_over_k(log_marg, log_prior)
    map_k = int(np.argmax(posterior))

    t0 = time.perf_counter()
    grid_idx = map_positions(rec, table, map_k)
    grid_times = grid.times[grid_idx] if map_k > 0 else np.empty(0, dtype=np.int64)
    timings["search_s"] = time.perf_counter() - t0

    refined = None
    t0 = time.perf_counter()
    if config.refine_enabled and map_k > 0:
        refined = refine_positions(
            grid_times,
            config.grid_g,
            provider,
            provider.n,
            max_sweeps=config.refine_max_sweeps,
        )
    timings["refine_s"] = time.perf_counter() - t0

    samples = None
    if config.samples_count > 0 and map_k > 0:
        idx = sample_positions(rec, table, map_k, config.seed, config.samples_count)
        samples = grid.times[idx]

    final_positions = refined if refined is not None else grid_times
    bounds = [0] + [int(t) for t in final_positions] + [provider.n]
    segments = []
    for j in range(len(bounds) - 1):
        start, end = bounds[j] + 1, bounds[j + 1]
        segments.append(
            {"start": start, "end": end, "summary": provider.segment_summary(start, end)}
        )

    field_block = None
    if config.model_kind == "gmrf" and config.field_enabled:
        t0 = time.perf_counter()
        summary = latent_field_mode_given_changepoints(
            provider.y,
            [int(t) for t in final_positions],
            provider.latent,
            provider.obs,
            provider.grid,
        )
        timings["field_s"] = time.perf_counter() - t0
        field_block = {
            "eta_mode": [round(float(v), 10) for v in summary.eta],
            "segments": [
                {
                    "start": fit.start,
                    "end": fit.end,
                    "hyper": {k: float(v) for k, v in fit.hyper.items()},
                    "intercept": None if fit.intercept is None else float(fit.intercept),
                }
                for fit in summary.segments
            ],
        }

    result = ChangepointResult(
        k_max=config.k_max,
        log_marginal_by_k=log_marg,
        log_k_prior=log_prior,
        posterior_k=posterior,
        map_k=map_k,
        map_positions_grid=grid_idx,
        map_positions_time=grid_times,
        refined_positions=refined,
        samples_time=samples,
        segment_summaries=segments,
    )

    document = {
        "tool": {"name": "cpdetect", "version": __version__, "rng": RNG_ID},
        "config": config.resolved(),
        "data": {
            "n": provider.n,
            "kind": prepared.raw.kind,
            "sha256": prepared.sha256,
            "scale_applied": prepared.scale,
            "meta": prepared.raw.meta,
        },
        "grid": {
            "g": grid.g,
            "num_points": grid.num_points,
            "table_entries": grid.table_entries,
            "nominal_eval_count": grid.nominal_eval_count,
        },
        "result": {
            "log_marginal_by_k": [_jsonf(v) for v in log_marg],
            "log_k_prior": [_jsonf(v) for v in log_prior],
            "posterior_k": [_jsonf(v) for v in posterior],
            "map_k": map_k,
            "map_positions_grid_index": [int(v) for v in grid_idx],
            "map_positions_time": [int(v) for v in grid_times],
            "refined_positions": None
            if refined is None
            else [int(v) for v in refined],
            "samples": None if samples is None else [[int(v) for v in row] for row in samples],
            "segments": segments,
        },
        "field": field_block,
        "diagnostics": {
            "provider_failures": table.failures,
            "failed_hyper_nodes": int(getattr(provider, "failed_nodes", 0)),
        },
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    return document, result


def run_bayes_factor(config_a: RunConfig, config_b: RunConfig, ks) -> dict:
    """Evidence ratios of model A over model B at matched changepoint counts."""
    prep_a = _prepare_data(config_a)
    prep_b = _prepare_data(config_b)
    if prep_a.sha256 != prep_b.sha256:
        raise ConfigError("bayes-factor requires both configs to target the same data")
    if config_a.grid_g != config_b.grid_g:
        raise ConfigError("bayes-factor requires matching grid spacing")
    if config_a.k_max != config_b.k_max or config_a.k_prior_kind != config_b.k_prior_kind:
        raise ConfigError("bayes-factor requires matching changepoint-count priors")
    if config_a.k_prior_mean != config_b.k_prior_mean:
        raise ConfigError("bayes-factor requires matching changepoint-count priors")
    ks = [int(k) for k in ks]
    for k in ks:
        if not 0 <= k <= config_a.k_max:
            raise ConfigError(f"requested k={k} outside 0..{config_a.k_max}")
    t0 = time.perf_counter()
    log_a = _analyze(config_a, prep_a)[4]
    log_b = _analyze(config_b, prep_b)[4]
    elapsed = time.perf_counter() - t0
    factors = {}
    for k in ks:
        factors[str(k)] = {
            "log_marginal_a": _jsonf(log_a[k]),
            "log_marginal_b": _jsonf(log_b[k]),
            "bayes_factor": bayes_factor(float(log_a[k]), float(log_b[k])),
        }
    return {
        "tool": {"name": "cpdetect", "version": __version__},
        "config_a": config_a.resolved(),
        "config_b": config_b.resolved(),
        "data": {"n": prep_a.raw.n, "sha256": prep_a.sha256},
        "grid_g": config_a.grid_g,
        "factors": factors,
        "timings": {"total_s": round(elapsed, 6)},
    }


def _jsonf(v: float):
    v = float(v)
    if np.isnan(v):
        return "nan"
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    return v


def write_document(document: dict, path) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
