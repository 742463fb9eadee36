"""Conditional model-X knockoffs, the knockoff filter, and a simulation bench."""

from .accel import backend
from .discrete import (
    DiscreteMatrix,
    dgm_blocked_knockoffs,
    dgm_expanding_knockoffs,
    dgm_split_knockoffs,
    mc_refined_blocking_column,
    mc_scip_knockoffs,
)
from .experiment import ExperimentConfig, preset, run_experiment
from .filters import (
    SelectionResult,
    WStatistics,
    cv_lasso_path,
    fdp_and_power,
    knockoff_threshold,
    knockoffs_with_unlabeled,
    lcd_statistics,
    unconditional_gaussian_knockoffs,
)
from .gaussian import (
    GaussianSuffStats,
    SVector,
    compute_suff_stats,
    gaussian_conditional_knockoffs,
    gaussian_conditional_knockoffs_known_mean,
    make_s_vector,
    partial_conditional_knockoffs,
    s_approx_sdp,
    s_equicorrelated,
    s_sdp,
)
from .ggm import (
    ggm_blocked_knockoffs,
    ggm_split_knockoffs,
    original_knockoff_correlations,
    two_pass_chain_plan,
)
from .graphs import (
    BlockingPlan,
    UndirectedGraph,
    components_after_deletion,
    greedy_blocking,
    greedy_coloring,
    is_global_cut_set,
    is_n_separated,
    randomized_blocking_plan,
    standard_covering,
)
from .results import KnockoffResult
from .rng import RngStream

__version__ = "0.1.0"
