"""Bayesian multiple-changepoint detection via filtering recursions.

Segment marginal likelihoods (exact conjugate forms or Laplace-approximated
latent-GMRF models) feed a backward dynamic program over a grid of candidate
changepoint locations, giving the posterior over the number of changepoints,
their most probable positions with off-grid refinement, posterior samples
and model-comparison Bayes factors without any Monte Carlo.
"""

__version__ = "0.1.0"

from .core import KPrior, ReducedGrid, build_reduced_grid, log_delta, log_sum_exp, log_z_k
from .recursions import (
    ChangepointResult,
    NumericalError,
    RecursionTable,
    SegmentTable,
    backward_recursions,
    bayes_factor,
    fill_segment_table,
    log_marginal_given_k,
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
    SegmentMarginalProvider,
)

__all__ = [
    "__version__",
    "KPrior",
    "ReducedGrid",
    "build_reduced_grid",
    "log_delta",
    "log_sum_exp",
    "log_z_k",
    "ChangepointResult",
    "NumericalError",
    "RecursionTable",
    "SegmentTable",
    "backward_recursions",
    "bayes_factor",
    "fill_segment_table",
    "log_marginal_given_k",
    "log_marginals_all_k",
    "map_positions",
    "posterior_over_k",
    "refine_positions",
    "sample_positions",
    "GaussianConjugateModel",
    "MultinomialDirichletModel",
    "PoissonGammaModel",
    "SegmentMarginalProvider",
]
