"""Adaptive dynamic-programming receivers for quantum pulse-position modulation.

The measurement of each PPM slot is chosen from the outcomes observed so
far; the strategy is optimized by backward induction over a two-dimensional
sufficient statistic and compared against closed-form reference receivers.
"""

from .baselines import (
    BaselineResult,
    IcnParams,
    Scheme,
    binary_optimal_angle,
    binary_pc_at_angle,
    binary_pc_optimal,
    icn_transitions,
    optimize_icn,
    pe_conditional_nulling,
    pe_direct_detection,
    pe_helstrom,
    pe_icn,
)
from .cache import TableCache
from .dp import DpResult, backward_step, last_stage_table, reuse_tables, run_backward
from .gk import gk_backward_step, gk_last_stage_table, gk_run_backward
from .model import (
    Association,
    GeneralizedKennedy,
    InvalidPovmError,
    ModulationConfig,
    Povm,
    Projective,
    SpectralDecomposition,
    TransitionKernel,
    config_from_gamma,
    config_from_mean_photons,
    gk_kernel,
    povm_decompose,
    povm_kernel,
    projector_kernel,
    relabel_kernel,
)
from .policy import (
    ControlMode,
    ExactEvaluation,
    PolicyTree,
    SystemState,
    cn_tree,
    dd_tree,
    exact_pc,
    export_tree,
    import_tree,
    retrace_forward,
    simulate,
)
from .tables import Branch, Family, GridSpec, Interpolation, RewardTable

__version__ = "0.1.0"
