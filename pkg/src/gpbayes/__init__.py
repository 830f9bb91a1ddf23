"""Gaussian process surrogates for Bayesian inverse problems.

Subpackages cover covariance kernels, GP regression, inverse-problem
primitives, surrogate posterior densities, Metropolis-Hastings sampling,
experimental-design tooling, and posterior-weighted error metrics, plus
a config-driven experiment CLI (``gpbayes``).
"""

from ._accel import USE_NUMBA
from .bayes import (
    BayesProblem,
    Darcy1D,
    GaussianDiagPrior,
    Identity,
    LogNormalDiagPrior,
    NoiseModel,
    Scalar1D,
    UniformBoxPrior,
    evidence,
    posterior_log_density,
    solve_darcy,
)
from .design import (
    FillDistance,
    GaussianDesign,
    PosteriorTruncatedDesign,
    TruncationRegion,
    UniformBoxDesign,
    fill_decay_study,
    fill_distance,
    sample_design,
    truncation_region,
)
from .gp import (
    GPPosterior,
    GPPrior,
    IllConditionedKernelError,
    fit,
    fit_hyperparameters,
    log_marginal_likelihood,
    predict_cov,
    predict_mean,
    predict_var,
    rkhs_norm,
    sample_path_on_grid,
    sample_paths_on_grid,
)
from .kernels import KernelSpec, eval_kernel, kernel_cross, kernel_matrix
from .mcmc import (
    Chain,
    chain_diagnostics,
    chain_seeds,
    metropolis_hastings,
    random_walk_proposal,
)
from .metrics import ErrorReport, design_error_study, hellinger, weighted_L2_error
from .surrogate import (
    GEmulator,
    PhiEmulator,
    SurrogatePosterior,
    emulate_forward,
    emulate_phi,
    monte_carlo_marginal_check,
)

__version__ = "0.1.0"
