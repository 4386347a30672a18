"""The default benchmark: AUV yaw plant, saturated rudder servo, the
stepwise test profile and factory functions for the compared controllers.
"""

from __future__ import annotations

import numpy as np

from .actuator import ActuatorParams
from .analysis import BenchmarkSetup
from .control_math import StateSpace
from .controllers import (
    ClassicPidController,
    ClassicPidParams,
    LqiAwController,
    PdAwController,
    PdAwParams,
    design_lqi_aw,
)
from .mpc import MpcController, MpcParams
from .simulation import Scenario, SimConfig

__all__ = [
    "remus_yaw_plant",
    "default_actuator",
    "default_scenario",
    "default_sim_config",
    "default_lqi_weights",
    "default_mpc_params",
    "make_controller",
    "build_setup",
    "BENCHMARK_CONTROLLERS",
    "ALL_CONTROLLERS",
]

BENCHMARK_CONTROLLERS = ("pd_aw", "lqi_aw", "mpc")
ALL_CONTROLLERS = BENCHMARK_CONTROLLERS + ("classic_pid",)


def remus_yaw_plant() -> StateSpace:
    """Linear 2-state yaw model (heading angle and yaw rate) at 1 m/s."""
    return StateSpace(
        A=np.array([[0.0, 1.0], [0.0, -2.16]]),
        B=np.array([[0.0], [1.98]]),
        C=np.array([[1.0, 0.0]]),
    )


def default_actuator() -> ActuatorParams:
    return ActuatorParams(tau=0.1, u_max=20.0, rate_max=30.0)


def default_scenario() -> Scenario:
    """Stepwise heading profile: three full reversals plus a small final step.

    The large reversals drive the actuator deep into rate saturation
    (the windup stress); the small final step keeps the settling-based
    instability detector sensitive during margin sweeps.
    """
    return Scenario(
        segments=((0.0, 0.0), (1.0, 100.0), (21.0, -100.0), (41.0, 100.0), (61.0, 80.0)),
        tf=80.0,
    )


def default_sim_config() -> SimConfig:
    return SimConfig(h=0.001, ts=0.01)


def default_lqi_weights() -> tuple[np.ndarray, np.ndarray]:
    """LQ weights on [integral-of-error, heading, yaw rate] and the input."""
    return np.diag([1000.0, 50.0, 25.0]), np.array([[1.0]])


def default_mpc_params(ts: float = 0.01) -> MpcParams:
    """Benchmark MPC settings.

    The control horizon is 20 samples rather than the full output
    horizon: tracking is indistinguishable on this plant (ISE within
    1.5%) while the dual QP solves stay fast enough for margin sweeps.
    """
    return MpcParams(ts=ts, ny=120, nu=20, lam=0.1, u_max=20.0, du_max=0.3)


def make_controller(
    name: str,
    plant: StateSpace | None = None,
    actuator: ActuatorParams | None = None,
    ts: float = 0.01,
    pd_params: PdAwParams | None = None,
    lqi_weights: tuple[np.ndarray, np.ndarray] | None = None,
    lqi_kaw: float = 4.0,
    classic_params: ClassicPidParams | None = None,
    mpc_params: MpcParams | None = None,
    mpc_preview: bool = False,
):
    """Build a fresh controller instance by benchmark name."""
    plant = plant or remus_yaw_plant()
    actuator = actuator or default_actuator()
    if name == "pd_aw":
        return PdAwController(pd_params or PdAwParams())
    if name == "lqi_aw":
        q, r = lqi_weights or default_lqi_weights()
        return LqiAwController(design_lqi_aw(plant, q, r, kaw=lqi_kaw), ts=ts)
    if name == "classic_pid":
        return ClassicPidController(classic_params or ClassicPidParams(), ts=ts)
    if name == "mpc":
        params = mpc_params or default_mpc_params(ts)
        return MpcController(plant, params=params, actuator=actuator, preview=mpc_preview)
    raise ValueError(f"unknown controller {name!r}; expected one of {ALL_CONTROLLERS}")


def build_setup(name: str, **overrides) -> BenchmarkSetup:
    """Benchmark setup for one controller with optional field overrides.

    Recognized overrides: ``plant``, ``actuator``, ``scenario``,
    ``config`` plus any keyword accepted by :func:`make_controller`.
    """
    plant = overrides.pop("plant", None) or remus_yaw_plant()
    actuator = overrides.pop("actuator", None) or default_actuator()
    scenario = overrides.pop("scenario", None) or default_scenario()
    config = overrides.pop("config", None) or default_sim_config()

    def factory(
        _name=name, _plant=plant, _actuator=actuator, _ts=config.ts, _kw=dict(overrides)
    ):
        return make_controller(_name, plant=_plant, actuator=_actuator, ts=_ts, **_kw)

    return BenchmarkSetup(
        plant=plant,
        controller_factory=factory,
        actuator=actuator,
        scenario=scenario,
        config=config,
    )
