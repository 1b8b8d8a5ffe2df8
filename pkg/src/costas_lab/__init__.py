"""Nonlinear BPSK Costas-loop models with lock analysis tooling.

Five loop models (waveform-level, constant-data waveform, carrier-averaged
with real arms, carrier-averaged with ideal arms, and the modified loop)
share one parameter set and one integration stack: fixed-step RK4 and
adaptive Dormand-Prince 5(4), both aligned to data-signal transitions.
On top sit lock detection, averaging-discrepancy sweeps, return maps with
limit-cycle location, a pull-in probe, and six bundled counterexample
scenarios showing where simplified models and careless stepping mislead.
"""

from .analysis import (
    AveragingRow,
    CycleInfo,
    CycleReport,
    LockCriterion,
    LockReport,
    PullinVerdict,
    ReturnMapResult,
    averaging_discrepancy,
    classic_equilibria,
    detect_lock,
    find_limit_cycles,
    ideal_lpf_error,
    pullin_probe,
    return_map,
)
from .errors import (
    ConfigError,
    CostasLabError,
    DivergenceError,
    InsufficientDataError,
    IntegrationError,
    LayoutError,
    ParameterError,
    StepUnderflowError,
)
from .experiments import (
    ComparisonReport,
    ExperimentReport,
    baseline_params,
    compare_models,
    run_example,
)
from .filters import (
    FilterSS,
    dc_gain,
    filter_output,
    impulse_response,
    make_first_order_lowpass,
    make_lag_lead_filter,
    make_pi_loop_filter,
    zero_input_response,
)
from .integrators import (
    ADAPTIVE_45,
    FIXED_RK4,
    IntegratorConfig,
    SectionResult,
    Trajectory,
    integrate,
    integrate_ode,
    integrate_to_section,
    rk4_step,
)
from .models import (
    DataSignal,
    LoopParams,
    ModelKind,
    StateLayout,
    carrier_phase,
    ideal_lpf_outputs,
    initial_frequency_difference,
    pack_state,
    pd_characteristic,
    rhs,
    rhs_classic,
    rhs_modified_signal,
    rhs_phase_space,
    rhs_signal_space,
    rhs_simplified_signal,
    state_layout,
    wrap_angle,
)

__version__ = "0.1.0"
