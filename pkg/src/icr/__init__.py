"""Iterative conditional replacement for conditionally specified models."""

__version__ = "0.1.0"

from .cycles import UpdatingCycle, classify, enumerate_permissible, is_permissible
from .discrete import (
    IcrConfig,
    IcrReport,
    Verdict,
    brute_force_fixed_point,
    compatibility_check,
    conditional_replacement,
    icr_run,
    markov_kernel_apply,
    mutual_stationarity_check,
    propagate_limits,
)
from .gaussian import (
    GaussianIcrConfig,
    GaussianIcrReport,
    assemble_trivariate,
    gaussian_compatibility_check,
    gaussian_icr_run,
    gaussian_mutual_stationarity_check,
    gaussian_propagate_limits,
    gaussian_replacement,
)
from .model import (
    ConditionalModel,
    DiscreteConditional,
    DiscreteDistribution,
    GaussianConditional,
    GaussianDistribution,
    VariableSpec,
    derive_conditionals,
    gaussian_kl,
    kl_divergence,
    marginalize,
    total_variation,
)
from .modelio import dump_model, load_model, parse_model
from .sampler import BatchSummary, ChainConfig, compare, run_chain
