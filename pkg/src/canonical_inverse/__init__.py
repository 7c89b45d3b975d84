"""Canonical-ensemble inverse problem for m-particle densities on finite spaces."""
from .ensemble import (
    CanonicalSystem,
    EnsembleSummary,
    PotentialSpec,
    bound_log,
    grad_log_F,
    hessian_log_F,
    log_F,
    log_partition,
    m_density,
    product_density,
    reduce_density,
    summarize,
    total_potential,
)
from .errors import BudgetExceededError, InputError, SamplerError
from .sampler import ChainConfig, DensityEstimate, estimate_gradient, run_chain
from .solver import SolveReport, SolverConfig, gauge_fix, invert, trivial_invert
from .space import StateSpace, SymmetricTable, integrate, random_table, symmetrize
from .verify import (
    CheckReport,
    check_bound,
    check_concavity,
    check_condition_P,
    check_consistency,
    check_gradient_fd,
    check_uniqueness,
    run_suite,
)

__version__ = "0.1.0"
