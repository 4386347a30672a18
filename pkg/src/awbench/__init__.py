"""Closed-loop benchmark of anti-windup controllers and constrained MPC
on an amplitude-and-rate-saturated AUV yaw-control loop.
"""

from .actuator import ActuatorParams, ActuatorState, actuator_step, saturate
from .analysis import (
    BenchmarkSetup,
    Metrics,
    compute_metrics,
    detect_instability,
    estimate_delay_margin,
    estimate_gain_margin,
    run_setup,
)
from .benchmark import (
    build_setup,
    default_actuator,
    default_scenario,
    default_sim_config,
    make_controller,
    remus_yaw_plant,
)
from .config import RunConfig, parse_config
from .control_math import (
    DiscreteStateSpace,
    RiccatiSolution,
    StateSpace,
    is_hurwitz,
    lqi_gains,
    mat_exp,
    solve_care,
    zoh_discretize,
)
from .controllers import (
    AwMode,
    ClassicPidController,
    ClassicPidParams,
    LqiAwController,
    LqiAwParams,
    MawCompensator,
    Measurement,
    PdAwController,
    PdAwParams,
    classic_pid_step,
    design_lqi_aw,
    lqi_aw_step,
    maw_step,
    notify_actuation,
    pd_aw_control,
)
from .mpc import MpcController, MpcParams, QpProblem, QpSolution, build_prediction, build_qp, solve_qp
from .simulation import Scenario, SimConfig, SimLog, run_closed_loop, scenario_setpoint_at

__version__ = "0.1.0"
