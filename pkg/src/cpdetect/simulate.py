"""Seeded generators for piecewise-homogeneous test series.

All generators are pure functions of their parameters and the seed, drawing
from ``numpy.random.default_rng`` (PCG64). ``RNG_ID`` names the algorithm so
emitted metadata pins reproducibility across machines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RNG_ID",
    "SVSegmentParams",
    "default_sv_params",
    "DEFAULT_SV_CHANGEPOINTS",
    "gen_piecewise_gaussian",
    "gen_sv",
    "gen_poisson_ar1",
]

RNG_ID = "numpy-default_rng-PCG64"


@dataclass(frozen=True)
class SVSegmentParams:
    """One stochastic-volatility segment: AR(1) log variance around 2*log(beta)."""

    phi: float
    two_log_beta: float
    sigma_x: float
    length: int

    def __post_init__(self):
        if abs(self.phi) >= 1:
            raise ValueError("need |phi| < 1")
        if self.sigma_x < 0:
            raise ValueError("sigma_x must be nonnegative")
        if self.length < 1:
            raise ValueError("segment length must be positive")


DEFAULT_SV_CHANGEPOINTS = (200, 400, 600, 700, 800, 850, 900, 950)


def default_sv_params() -> list[SVSegmentParams]:
    """Nine-segment benchmark configuration over 1000 points.

    Segment boundaries fall at ``DEFAULT_SV_CHANGEPOINTS``; later segments
    are shorter and carry smaller level shifts.
    """
    phis = (0.9, 0.8, 0.9, 0.7, 0.8, 0.9, 0.8, 0.9, 0.8)
    two_log_betas = (0.0, 2.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.25, 0.0)
    sigmas = (0.01, 0.05, 0.01, 0.05, 0.01, 0.05, 0.01, 0.05, 0.01)
    bounds = (0,) + DEFAULT_SV_CHANGEPOINTS + (1000,)
    lengths = tuple(bounds[i + 1] - bounds[i] for i in range(len(bounds) - 1))
    return [
        SVSegmentParams(phi=p, two_log_beta=b, sigma_x=s, length=m)
        for p, b, s, m in zip(phis, two_log_betas, sigmas, lengths)
    ]


def _ar1_path(rng, length: int, phi: float, sigma_x: float) -> np.ndarray:
    x = np.zeros(length)
    if sigma_x == 0:
        return x
    x[0] = rng.normal(0.0, sigma_x / np.sqrt(1.0 - phi * phi))
    innov = rng.normal(0.0, sigma_x, size=length - 1)
    for i in range(1, length):
        x[i] = phi * x[i - 1] + innov[i - 1]
    return x


def gen_piecewise_gaussian(means, sds, lengths, seed: int) -> np.ndarray:
    """Concatenated i.i.d. Gaussian segments."""
    means = list(means)
    sds = list(sds)
    lengths = list(lengths)
    if not (len(means) == len(sds) == len(lengths)):
        raise ValueError("means, sds and lengths must have equal length")
    if any(s < 0 for s in sds) or any(m < 1 for m in lengths):
        raise ValueError("need sds >= 0 and lengths >= 1")
    rng = np.random.default_rng(seed)
    parts = [rng.normal(mu, sd, size=m) for mu, sd, m in zip(means, sds, lengths)]
    return np.concatenate(parts)


def gen_sv(params, seed: int):
    """Stochastic-volatility series: y_i ~ N(0, exp(2 log beta + x_i)).

    Each segment restarts its AR(1) log-variance path from the stationary
    distribution. Returns ``(y, x)`` with ``x`` the latent log variance
    offsets.
    """
    params = list(params)
    if not params:
        raise ValueError("need at least one segment")
    rng = np.random.default_rng(seed)
    ys, xs = [], []
    for p in params:
        x = _ar1_path(rng, p.length, p.phi, p.sigma_x)
        sd = np.exp(0.5 * (p.two_log_beta + x))
        ys.append(rng.normal(0.0, 1.0, size=p.length) * sd)
        xs.append(x)
    return np.concatenate(ys), np.concatenate(xs)


def gen_poisson_ar1(n: int, alpha: float, phi: float, sigma_x: float, seed: int) -> np.ndarray:
    """Counts with log rate alpha + x_i, x an AR(1) path."""
    if n < 1:
        raise ValueError("need n >= 1")
    if abs(phi) >= 1:
        raise ValueError("need |phi| < 1")
    if sigma_x < 0:
        raise ValueError("sigma_x must be nonnegative")
    rng = np.random.default_rng(seed)
    x = _ar1_path(rng, n, phi, sigma_x)
    return rng.poisson(np.exp(alpha + x)).astype(np.int64)
