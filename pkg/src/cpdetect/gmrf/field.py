"""Latent field reconstruction conditional on a set of changepoints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .laplace import GaussianApprox, HyperGrid, NewtonError, newton_gaussian_approx
from .models import LOG_2PI, LatentSpec, ObsSpec, phi_from_kappa

__all__ = ["SegmentFieldFit", "FieldSummary", "latent_field_mode_given_changepoints"]


@dataclass
class SegmentFieldFit:
    start: int
    end: int
    hyper: dict
    intercept: float | None
    x_mode: np.ndarray = field(repr=False)
    eta_mode: np.ndarray = field(repr=False)
    log_weight: float = float("-inf")


@dataclass
class FieldSummary:
    segments: list[SegmentFieldFit]
    eta: np.ndarray = field(repr=False)


def latent_field_mode_given_changepoints(
    y,
    changepoints,
    latent: LatentSpec,
    obs: ObsSpec,
    grid: HyperGrid,
) -> FieldSummary:
    """Per-segment posterior field modes at the best grid node.

    For each segment the hyper node maximizing Laplace value plus log prior
    weight is selected and the Gaussian-approximation mode at that node is
    returned; segment fields are concatenated into one series of linear
    predictors. Raises :class:`NewtonError` if a whole segment fails.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    taus = [int(t) for t in changepoints]
    if sorted(taus) != taus or len(set(taus)) != len(taus):
        raise ValueError("changepoints must be strictly increasing")
    if any(t < 1 or t > n - 1 for t in taus):
        raise ValueError("changepoints must lie in 1..n-1")
    bounds = [0] + taus + [n]
    segments = []
    eta = np.empty(n)
    for j in range(len(bounds) - 1):
        start, end = bounds[j] + 1, bounds[j + 1]
        y_seg = y[start - 1 : end]
        best: tuple[float, dict, GaussianApprox] | None = None
        warm = None
        for i in range(grid.size):
            hyper = grid.point(i)
            try:
                approx = newton_gaussian_approx(y_seg, latent, obs, hyper, start=warm)
            except NewtonError:
                warm = None
                continue
            warm = (approx.x, approx.intercept)
            score = (
                approx.objective
                + 0.5 * approx.dim * LOG_2PI
                - 0.5 * approx.log_det
                + grid.log_pw[i]
            )
            if best is None or score > best[0]:
                best = (score, hyper, approx)
        if best is None:
            raise NewtonError(f"no hyper node converged on segment {start}..{end}")
        score, hyper, approx = best
        readable = dict(hyper)
        readable["sigma_x"] = float(np.exp(-0.5 * hyper["log_prec_x"]))
        if "kappa" in hyper:
            readable["phi"] = float(phi_from_kappa(hyper["kappa"]))
        if "log_prec_y" in hyper:
            readable["sigma_y"] = float(np.exp(-0.5 * hyper["log_prec_y"]))
        fit = SegmentFieldFit(
            start=start,
            end=end,
            hyper=readable,
            intercept=approx.intercept,
            x_mode=approx.x,
            eta_mode=approx.eta,
            log_weight=score,
        )
        segments.append(fit)
        eta[start - 1 : end] = fit.eta_mode
    return FieldSummary(segments=segments, eta=eta)
