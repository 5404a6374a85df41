"""Latent-field and observation model specifications for hierarchical segments.

A segment model couples a Gaussian latent process x (AR(1) or first-order
random walk, tridiagonal precision) with one of three observation densities
through the linear predictor ``eta_i = x_i + intercept``:

* ``gaussian-identity``  y_i ~ N(eta_i, 1/tau_y)
* ``poisson-log``        y_i ~ Poisson(exp(eta_i))
* ``sv-zero-mean``       y_i ~ N(0, exp(eta_i)), so the intercept plays the
  role of twice the log volatility scale.

Hyperparameters (latent innovation precision, AR(1) persistence through
``kappa = logit((1 + phi) / 2)``, observation noise precision) carry priors
used by the deterministic integration grid in :mod:`cpdetect.gmrf.laplace`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln
from scipy.stats import gamma as gamma_dist
from scipy.stats import norm as norm_dist

from ._banded import tridiag_cholesky, tridiag_logdet, tridiag_quadform

__all__ = [
    "GammaPrior",
    "NormalPrior",
    "LatentSpec",
    "ObsSpec",
    "phi_from_kappa",
    "kappa_from_phi",
    "latent_precision",
    "latent_log_det",
    "latent_log_prior",
    "ar1_log_prior",
    "obs_terms",
]

LOG_2PI = float(np.log(2.0 * np.pi))

LATENT_KINDS = ("ar1", "rw1")
OBS_KINDS = ("gaussian-identity", "poisson-log", "sv-zero-mean")


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape, rate) prior, mean shape/rate."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("gamma shape and rate must be positive")

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return (
            self.shape * np.log(self.rate)
            - gammaln(self.shape)
            + (self.shape - 1.0) * np.log(x)
            - self.rate * x
        )

    def ppf(self, q):
        return gamma_dist.ppf(q, a=self.shape, scale=1.0 / self.rate)


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("normal prior sd must be positive")

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.sd
        return -0.5 * (LOG_2PI + 2.0 * np.log(self.sd) + z * z)

    def ppf(self, q):
        return norm_dist.ppf(q, loc=self.mean, scale=self.sd)


@dataclass(frozen=True)
class LatentSpec:
    """Latent Gaussian process choice plus its hyperpriors.

    ``ar1`` needs both an innovation-precision prior and a kappa prior; the
    random walk only needs the precision prior and a proper anchor on its
    first state (otherwise the segment marginal likelihood is undefined).
    An optional intercept is appended to the latent vector with a Normal
    prior rather than being treated as a grid dimension.
    """

    kind: str
    precision_prior: GammaPrior
    kappa_prior: NormalPrior | None = None
    anchor_sd: float = 10.0
    intercept: NormalPrior | None = None

    def __post_init__(self):
        if self.kind not in LATENT_KINDS:
            raise ValueError(f"unknown latent kind {self.kind!r}")
        if self.kind == "ar1" and self.kappa_prior is None:
            raise ValueError("ar1 latent requires a kappa prior")
        if self.anchor_sd <= 0:
            raise ValueError("rw1 anchor sd must be positive")


@dataclass(frozen=True)
class ObsSpec:
    kind: str
    noise_precision_prior: GammaPrior | None = None

    def __post_init__(self):
        if self.kind not in OBS_KINDS:
            raise ValueError(f"unknown observation kind {self.kind!r}")
        if self.kind == "gaussian-identity" and self.noise_precision_prior is None:
            raise ValueError("gaussian-identity observations need a noise precision prior")


def phi_from_kappa(kappa):
    """Back-transform kappa = logit((1 + phi) / 2) to phi in (-1, 1)."""
    return 2.0 * expit(np.asarray(kappa, dtype=float)) - 1.0


def kappa_from_phi(phi):
    phi = np.asarray(phi, dtype=float)
    if np.any(np.abs(phi) >= 1):
        raise ValueError("persistence must satisfy |phi| < 1")
    return np.log1p(phi) - np.log1p(-phi)


def latent_precision(spec: LatentSpec, m: int, tau_x: float, phi: float | None):
    """Tridiagonal precision (diag, off) of the latent prior for length m."""
    if m < 1:
        raise ValueError("need at least one latent point")
    if spec.kind == "ar1":
        if phi is None or abs(phi) >= 1:
            raise ValueError("ar1 needs |phi| < 1")
        if m == 1:
            return np.array([tau_x * (1.0 - phi * phi)]), np.empty(0)
        diag = np.full(m, tau_x * (1.0 + phi * phi))
        diag[0] = diag[-1] = tau_x
        off = np.full(m - 1, -tau_x * phi)
        return diag, off
    # rw1: difference precision plus a proper anchor on the first state
    diag = np.full(m, 2.0 * tau_x)
    if m == 1:
        diag = np.zeros(1)
    else:
        diag[0] = diag[-1] = tau_x
    diag[0] += 1.0 / spec.anchor_sd**2
    off = np.full(max(m - 1, 0), -tau_x)
    return diag, off


def latent_log_det(spec: LatentSpec, m: int, tau_x: float, phi: float | None) -> float:
    """Log determinant of the latent precision."""
    if spec.kind == "ar1":
        if phi is None or abs(phi) >= 1:
            raise ValueError("ar1 needs |phi| < 1")
        return m * float(np.log(tau_x)) + float(np.log1p(-phi * phi))
    diag, off = latent_precision(spec, m, tau_x, phi)
    return tridiag_logdet(tridiag_cholesky(diag, off))


def latent_log_prior(spec: LatentSpec, x: np.ndarray, tau_x: float, phi: float | None) -> float:
    """Log density of the latent vector under its Gaussian prior."""
    x = np.asarray(x, dtype=float)
    diag, off = latent_precision(spec, x.size, tau_x, phi)
    ld = latent_log_det(spec, x.size, tau_x, phi)
    return 0.5 * ld - 0.5 * tridiag_quadform(diag, off, x) - 0.5 * x.size * LOG_2PI


def ar1_log_prior(x: np.ndarray, phi: float, sigma_x2: float) -> float:
    """Stationary AR(1) log density: N(x1; 0, s2/(1-phi^2)) then innovations."""
    if abs(phi) >= 1:
        raise ValueError("persistence must satisfy |phi| < 1")
    if sigma_x2 <= 0:
        raise ValueError("innovation variance must be positive")
    spec = LatentSpec(
        kind="ar1",
        precision_prior=GammaPrior(1.0, 1.0),
        kappa_prior=NormalPrior(0.0, 1.0),
    )
    return latent_log_prior(spec, x, 1.0 / sigma_x2, phi)


def obs_terms(spec: ObsSpec, y: np.ndarray, eta: np.ndarray, tau_y: float | None = None):
    """Pointwise log likelihood with first and (negated) second derivatives.

    Returns ``(ll, grad, curv)`` where ``curv = -d2 ll / d eta^2 >= 0``.
    Derivatives are exact; overflow in the exponentials yields ``-inf`` log
    likelihoods that mode finding rejects through its line search.
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if spec.kind == "gaussian-identity":
        if tau_y is None or tau_y <= 0:
            raise ValueError("gaussian-identity needs tau_y > 0")
        resid = y - eta
        ll = 0.5 * (np.log(tau_y) - LOG_2PI) - 0.5 * tau_y * resid * resid
        grad = tau_y * resid
        curv = np.full(y.size, tau_y)
        return ll, grad, curv
    if spec.kind == "poisson-log":
        with np.errstate(over="ignore"):
            rate = np.exp(eta)
        ll = y * eta - rate - gammaln(y + 1.0)
        grad = y - rate
        curv = rate
        return ll, grad, curv
    # sv-zero-mean
    with np.errstate(over="ignore"):
        half_quad = 0.5 * y * y * np.exp(-eta)
    ll = -0.5 * (LOG_2PI + eta) - half_quad
    grad = -0.5 + half_quad
    curv = half_quad
    return ll, grad, curv
