"""Bayesian hierarchical clustering with a coalescent prior and Gaussian diffusion likelihood."""

from .coalescent import Dendrogram, coalescent_rate, from_newick, log_prior, sample_prior
from .kernels import CovarianceModel, build_covariance, grid_coords
from .samplers import (
    SamplerConfig,
    SMCResult,
    run_alternating,
    run_greedy,
    run_postpost,
    run_smc,
    sample_hyperparams,
)
from .tree_model import joint_log_density, merge_message, tree_log_likelihood

__version__ = "0.1.0"
