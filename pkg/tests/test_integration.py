"""End-to-end runs on synthetic stand-ins for the published datasets.

These keep every pipeline (sequence segmentation, count regimes with a
latent field, volatility regimes) exercised even when the real data files
are absent.
"""

import datetime as dt
import json

import numpy as np

import cpdetect as cp
from cpdetect.config import RunConfig
from cpdetect.core import KPrior
from cpdetect.runner import run_detect
from cpdetect.segmodels import MultinomialDirichletModel
from cpdetect.simulate import SVSegmentParams, gen_sv


def test_synthetic_genome_segmentation_recovers_planted_changes():
    rng = np.random.default_rng(123)
    blocks = [
        (3000, [0.30, 0.20, 0.20, 0.30]),
        (4500, [0.15, 0.35, 0.35, 0.15]),
        (6000, [0.30, 0.20, 0.20, 0.30]),
        (4502, [0.20, 0.30, 0.30, 0.20]),
    ]
    codes = np.concatenate([rng.choice(4, size=m, p=p) for m, p in blocks])
    true_cps = np.cumsum([m for m, _ in blocks])[:-1]
    model = MultinomialDirichletModel.from_codes(codes, alpha=1.0)
    for g in (10, 25):
        grid = cp.build_reduced_grid(codes.size, g)
        table = cp.fill_segment_table(model, grid)
        rec = cp.backward_recursions(table, 10)
        post = cp.posterior_over_k(
            cp.log_marginals_all_k(rec, table), KPrior("uniform", 10).log_weights()
        )
        map_k = int(np.argmax(post))
        assert map_k == 3
        refined = cp.refine_positions(
            grid.times[cp.map_positions(rec, table, map_k)], g, model, codes.size
        )
        # composition boundaries are identifiable up to sampling noise plus
        # one grid step (refinement only searches g-1 points either side)
        for t in true_cps:
            assert np.min(np.abs(refined - t)) <= 2 * g + 25


def test_event_date_counts_with_latent_field_detects_rate_drop(tmp_path):
    rng = np.random.default_rng(99)
    rates = np.concatenate([np.full(180, 0.5), np.full(220, 0.08)])
    counts = rng.poisson(rates)
    start = dt.date(1900, 1, 6)
    lines = []
    for week, c in enumerate(counts):
        for j in range(int(c)):
            lines.append((start + dt.timedelta(days=7 * week + (j % 7))).isoformat())
    data_path = tmp_path / "events.csv"
    data_path.write_text("\n".join(lines) + "\n")

    config = RunConfig.from_mapping(
        {
            "data.path": str(data_path),
            "data.format": "event-dates",
            "model.kind": "gmrf",
            "model.latent.kind": "ar1",
            "model.latent.precision_prior.shape": "4",
            "model.latent.precision_prior.rate": "0.01",
            "model.latent.kappa_prior.mean": "3",
            "model.latent.kappa_prior.sd": "1.89",
            "model.obs.kind": "poisson-log",
            "grid.g": "40",
            "k.max": "4",
            "k.prior.kind": "poisson",
            "k.prior.mean": "3",
            "hyper.nodes_per_dim": "5",
            "output.path": str(tmp_path / "out.json"),
        }
    )
    document, result = run_detect(config)
    assert result.map_k == 1
    assert abs(int(result.refined_positions[0]) - 180) <= 15
    field = document["field"]
    assert field is not None
    eta = np.array(field["eta_mode"])
    # log intensity drops across the detected change
    assert eta[:150].mean() > eta[250:].mean() + 1.0
    assert len(field["segments"]) == 2

    from cpdetect.runner import write_document
    from cpdetect.report import render

    result_path = tmp_path / "out.json"
    write_document(document, result_path)
    written = render(result_path, tmp_path / "figs")
    names = {p.name for p in written}
    assert {"posterior_k.png", "segmentation.png", "field.png", "summary.csv"} <= names


def test_sv_series_end_to_end_via_config(tmp_path):
    params = [
        SVSegmentParams(phi=0.9, two_log_beta=0.0, sigma_x=0.02, length=120),
        SVSegmentParams(phi=0.8, two_log_beta=2.5, sigma_x=0.05, length=120),
    ]
    y, _ = gen_sv(params, seed=4)
    data_path = tmp_path / "sv.csv"
    data_path.write_text("\n".join(repr(float(v)) for v in y) + "\n")
    config = RunConfig.from_mapping(
        {
            "data.path": str(data_path),
            "data.format": "numeric",
            "model.kind": "gmrf",
            "model.latent.kind": "ar1",
            "model.latent.precision_prior.shape": "30",
            "model.latent.precision_prior.rate": "0.02",
            "model.latent.kappa_prior.mean": "3",
            "model.latent.kappa_prior.sd": "1",
            "model.obs.kind": "sv-zero-mean",
            "grid.g": "10",
            "k.max": "4",
            "k.prior.kind": "poisson",
            "k.prior.mean": "2",
            "hyper.nodes_per_dim": "5",
            "field.enabled": "false",
            "output.path": str(tmp_path / "out.json"),
        }
    )
    document, result = run_detect(config)
    assert config.intercept_enabled and config.intercept_sd == 3.0
    assert result.map_k == 1
    assert abs(int(result.refined_positions[0]) - 120) <= 10
    # config echo reproduces the run settings
    echo = document["config"]
    assert echo["model.obs.kind"] == "sv-zero-mean"
    assert json.loads(json.dumps(echo)) == echo


def test_rw1_latent_field_runs_end_to_end(tmp_path):
    rng = np.random.default_rng(17)
    level = np.concatenate([np.zeros(100), np.full(100, 4.0)])
    y = level + np.cumsum(rng.normal(0, 0.05, 200)) + rng.normal(0, 0.4, 200)
    data_path = tmp_path / "y.csv"
    data_path.write_text("\n".join(repr(float(v)) for v in y) + "\n")
    config = RunConfig.from_mapping(
        {
            "data.path": str(data_path),
            "data.format": "numeric",
            "model.kind": "gmrf",
            "model.latent.kind": "rw1",
            "model.latent.precision_prior.shape": "1",
            "model.latent.precision_prior.rate": "0.01",
            "model.obs.kind": "gaussian-identity",
            "model.obs.noise_precision_prior.shape": "1",
            "model.obs.noise_precision_prior.rate": "0.01",
            "grid.g": "20",
            "k.max": "3",
            "hyper.nodes_per_dim": "5",
            "field.enabled": "false",
            "output.path": str(tmp_path / "out.json"),
        }
    )
    document, result = run_detect(config)
    assert config.scaling_enabled is True
    assert document["data"]["scale_applied"] > 0
    assert result.map_k == 1
    assert abs(int(result.refined_positions[0]) - 100) <= 8
