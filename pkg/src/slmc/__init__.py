"""Subspace Langevin Monte Carlo: LMC, preconditioned LMC and SLMC samplers
with eigenblock partitions, test targets, sample-quality metrics and
experiment drivers."""

from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    emit_outputs,
    load_config,
    parse_config,
    preset,
    run_experiment,
)
from .linalg import (
    DivergenceError,
    EigenblockPartition,
    EigenDecomposition,
    NotPositiveDefiniteError,
    eigenblock_partition,
    partition_matrix,
    sample_block,
    sym_eigen,
)
from .metrics import abs_sum_gaussian_mean, gaussian_w2, ks_statistic_1d, ksd, median_heuristic, test_error
from .preconditioners import (
    adagrad_schedule,
    avg_hessian_schedule,
    basis_schedule,
    fixed_schedule,
    rmsprop_schedule,
)
from .samplers import ChainState, SamplerConfig, Trajectory, lmc_step, plmc_step, run_chain, slmc_step
from .streams import RandomStream
from .targets import (
    FunnelTarget,
    GaussianTarget,
    LogisticPosterior,
    RotatedTarget,
    funnel_target,
    gaussian_target,
    generate_logistic_data,
    logistic_posterior,
)

__version__ = "0.1.0"
