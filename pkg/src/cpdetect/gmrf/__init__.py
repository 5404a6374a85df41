"""Hierarchical latent-Gaussian segment models with Laplace marginals."""

from .field import FieldSummary, SegmentFieldFit, latent_field_mode_given_changepoints
from .laplace import (
    GMRF_MIN_SEGMENT_LEN,
    GaussianApprox,
    GmrfMarginalProvider,
    HyperGrid,
    NewtonError,
    hyper_grid_log_marginal,
    laplace_log_marginal_given_hyper,
    newton_gaussian_approx,
)
from .models import (
    GammaPrior,
    LatentSpec,
    NormalPrior,
    ObsSpec,
    ar1_log_prior,
    kappa_from_phi,
    latent_log_det,
    latent_log_prior,
    latent_precision,
    obs_terms,
    phi_from_kappa,
)

__all__ = [
    "FieldSummary",
    "SegmentFieldFit",
    "latent_field_mode_given_changepoints",
    "GMRF_MIN_SEGMENT_LEN",
    "GaussianApprox",
    "GmrfMarginalProvider",
    "HyperGrid",
    "NewtonError",
    "hyper_grid_log_marginal",
    "laplace_log_marginal_given_hyper",
    "newton_gaussian_approx",
    "GammaPrior",
    "LatentSpec",
    "NormalPrior",
    "ObsSpec",
    "ar1_log_prior",
    "kappa_from_phi",
    "latent_log_det",
    "latent_log_prior",
    "latent_precision",
    "obs_terms",
    "phi_from_kappa",
]
