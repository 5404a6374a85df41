"""Companion rendering of a result document: figures plus a csv summary.

Consumes the JSON written by ``cpdetect detect``; the detection pipeline
itself never touches matplotlib.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ingest import DataError, read_series

__all__ = ["render"]


def _load_document(result_path) -> dict:
    path = Path(result_path)
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load result document {path}: {exc}")


def render(result_path, outdir, data_path=None) -> list[Path]:
    """Write posterior/segmentation figures and a csv next to each other."""
    document = _load_document(result_path)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    res = document["result"]
    posterior = np.array([float(v) for v in res["posterior_k"]])
    ks = np.arange(posterior.size)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(ks, posterior, color="#4878d0")
    ax.set_xlabel("number of changepoints k")
    ax.set_ylabel("posterior probability")
    ax.set_title(f"posterior over k (mode {res['map_k']})")
    fig.tight_layout()
    path = outdir / "posterior_k.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    positions = res.get("refined_positions") or res.get("map_positions_time") or []
    series = None
    src = data_path or document["config"].get("data.path")
    fmt = document["config"].get("data.format")
    if src and fmt and Path(src).exists():
        data = read_series(src, fmt)
        if data.kind != "dna":
            series = np.asarray(data.values, dtype=float)

    if series is not None:
        fig, ax = plt.subplots(figsize=(9, 4))
        ax.plot(np.arange(1, series.size + 1), series, lw=0.6, color="0.3")
        for tau in positions:
            ax.axvline(tau, color="#d65f5f", lw=1.2, ls="--")
        ax.set_xlabel("index")
        ax.set_ylabel("value")
        ax.set_title("series with detected changepoints")
        fig.tight_layout()
        path = outdir / "segmentation.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    field = document.get("field")
    if field and field.get("eta_mode"):
        eta = np.array([float(v) for v in field["eta_mode"]])
        fig, ax = plt.subplots(figsize=(9, 4))
        ax.plot(np.arange(1, eta.size + 1), eta, color="#4878d0", lw=1.0)
        for tau in positions:
            ax.axvline(tau, color="#d65f5f", lw=1.2, ls="--")
        ax.set_xlabel("index")
        ax.set_ylabel("linear predictor mode")
        ax.set_title("latent field conditional on detected changepoints")
        fig.tight_layout()
        path = outdir / "field.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    csv_path = outdir / "summary.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "log_marginal", "log_prior", "posterior"])
        for k in ks:
            writer.writerow(
                [
                    int(k),
                    res["log_marginal_by_k"][k],
                    res["log_k_prior"][k],
                    res["posterior_k"][k],
                ]
            )
        writer.writerow([])
        writer.writerow(["changepoint_rank", "position"])
        for i, tau in enumerate(positions, start=1):
            writer.writerow([i, int(tau)])
    written.append(csv_path)
    return written
