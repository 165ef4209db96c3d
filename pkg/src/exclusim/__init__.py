"""exclusim: event-driven exclusion dynamics with long jumps, and the
variational machinery that ties the particle scale to its macroscopic limit.
"""

__version__ = "0.1.0"

from ._kernels import MINUS_INF, NUMBA_ENABLED, PLUS_INF
from .core import (
    FROZEN,
    OPEN,
    Configuration,
    EventLog,
    SandwichResult,
    Trajectory,
    apply_jump,
    evolve,
    position_str,
    positions_to_float,
    sandwich_evolve,
    validate,
)
from .coupling import (
    CoupledRun,
    WedgeProcess,
    WedgeRun,
    build_wedge_family,
    check_subadditivity,
    check_variational_identity,
    check_wedge_monotonicity,
    evolve_coupled,
    run_wedge,
)
from .hopflax import (
    ConvexFnTable,
    DualTable,
    FluxTable,
    HopfLaxResult,
    MacroProfile,
    convex_conjugate,
    current_curve,
    flux_from_shape,
    hopf_lax_solve,
    linear_profile,
    riemann_profile,
    solve_profile,
    step_profile,
    tasep_shape,
)
from .rates import (
    ClockStream,
    MergedEvents,
    RateTable,
    derive_rng,
    derive_seed,
    make_rate_table,
    merge_streams,
    sample_clock_field,
    sample_clock_stream,
    tasep_rates,
)
from .shape import (
    EmpiricalProfile,
    ShapeEstimate,
    build_initial_positions,
    check_shape_properties,
    convexify,
    empirical_profile,
    estimate_shape,
    estimate_shape_at_times,
    greatest_convex_minorant,
    kink_location,
    sample_step_positions,
    sample_step_positions_at,
)

__all__ = [name for name in dir() if not name.startswith("_")]
