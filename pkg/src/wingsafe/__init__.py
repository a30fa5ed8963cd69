"""Barrier-function safety filtering for fixed-wing collision avoidance
under limited-range sensing."""

from .dynamics import (
    ActuatorLimits,
    ControlInput,
    VehicleState,
    clamp_input,
    derivative,
    propagate_straight,
    propagate_turn,
    step_rk4,
    wrap_angle,
)
from .barrier import (
    BarrierConfig,
    BarrierValue,
    DomainError,
    LinearGain,
    PairState,
    SafetyParams,
    StraightManeuver,
    TurnManeuver,
    constraint_margin,
    grad_h,
    h_oracle,
    h_straight,
    h_turn,
    h_value,
    lie_derivatives,
    rho_straight,
    rho_turn,
    squared_planar_distance,
)

from .shaping import (
    CompatibilityReport,
    SensorModel,
    ShapingParams,
    alpha2,
    check_sensor_compatible,
    in_sensor_set,
    make_quadratic_psi,
    min_sensing_range,
    psi_deriv,
    psi_eval,
    shape_grad,
    shape_h,
    xi_from_range,
)
from .qp import ConstraintRow, QPInfeasibleError, QPProblem, kkt_residual, solve_qp
from .safety_filter import FilterConfig, FilterResult, assemble_pair_constraint, filter_controls
from .sim import (
    CircleController,
    GoalController,
    Metrics,
    SimTrace,
    Simulation,
    World,
    compute_metrics,
    nominal_circle_controller,
    nominal_goal_controller,
    step_world,
)
from .scenarios import (
    ScenarioConfig,
    VehicleSpec,
    builtin_scenarios,
    config_from_dict,
    config_to_dict,
    load_config,
    run_scenario,
    save_config,
)

__all__ = [
    "ActuatorLimits",
    "BarrierConfig",
    "BarrierValue",
    "CircleController",
    "CompatibilityReport",
    "ConstraintRow",
    "ControlInput",
    "DomainError",
    "FilterConfig",
    "FilterResult",
    "GoalController",
    "LinearGain",
    "Metrics",
    "PairState",
    "QPInfeasibleError",
    "QPProblem",
    "SafetyParams",
    "ScenarioConfig",
    "SensorModel",
    "ShapingParams",
    "SimTrace",
    "Simulation",
    "StraightManeuver",
    "TurnManeuver",
    "VehicleSpec",
    "VehicleState",
    "World",
    "alpha2",
    "assemble_pair_constraint",
    "builtin_scenarios",
    "check_sensor_compatible",
    "clamp_input",
    "compute_metrics",
    "config_from_dict",
    "config_to_dict",
    "constraint_margin",
    "derivative",
    "filter_controls",
    "grad_h",
    "h_oracle",
    "h_straight",
    "h_turn",
    "h_value",
    "in_sensor_set",
    "kkt_residual",
    "lie_derivatives",
    "load_config",
    "make_quadratic_psi",
    "min_sensing_range",
    "nominal_circle_controller",
    "nominal_goal_controller",
    "propagate_straight",
    "propagate_turn",
    "psi_deriv",
    "psi_eval",
    "rho_straight",
    "rho_turn",
    "run_scenario",
    "save_config",
    "shape_grad",
    "shape_h",
    "solve_qp",
    "squared_planar_distance",
    "step_rk4",
    "step_world",
    "wrap_angle",
    "xi_from_range",
]

__version__ = "0.1.0"
