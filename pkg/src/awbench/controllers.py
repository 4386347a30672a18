"""Feedback laws: rate-feedback PD and LQI trackers with deficiency-based
anti-windup, the classic PID anti-windup family, and the dynamic
model-based compensator.

All anti-windup variants work from the actuator deficiency
``delta_u = u_c - u_ac`` (commanded minus actuated), so they need no model
of the saturation elements themselves.

A note on the PD law: written as ``u_c = Kp*e - Kd*ydot - Kaw*delta_u``
with an instantaneous deficiency, the equation is implicit in ``u_c``.
``PdAwController`` solves it exactly each tick,

    u_c = (Kp*e - Kd*ydot + Kaw*u_ac) / (1 + Kaw),

using the latest actuator measurement.  Realizing the same law with a
one-sample-delayed deficiency is unstable for Kaw > 1 (the internal
recursion u_c(k) = ... - Kaw*u_c(k-1) diverges), so the solved form is the
only usable discrete implementation at the benchmark gain Kaw = 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .control_math import StateSpace, is_hurwitz, lqi_gains

__all__ = [
    "Measurement",
    "PdAwParams",
    "PdAwState",
    "pd_aw_control",
    "PdAwController",
    "LqiAwParams",
    "LqiAwState",
    "lqi_aw_step",
    "design_lqi_aw",
    "LqiAwController",
    "notify_actuation",
    "AwMode",
    "ClassicPidParams",
    "ClassicPidState",
    "classic_pid_step",
    "ClassicPidController",
    "MawCompensator",
    "maw_step",
]


@dataclass(frozen=True)
class Measurement:
    """Plant and actuator signals available to a controller at a tick."""

    y: float
    ydot: float
    x_p: np.ndarray
    u_ac: float


# ---------------------------------------------------------------------------
# PD with anti-windup output correction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PdAwParams:
    kp: float = 8.0
    kd: float = 6.0
    kaw: float = 4.0

    def __post_init__(self):
        for name in ("kp", "kd", "kaw"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class PdAwState:
    """Deficiency recorded at the previous actuation."""

    delta_u_prev: float = 0.0


def pd_aw_control(params: PdAwParams, e: float, ydot: float, delta_u: float) -> float:
    """The PD anti-windup law for a given deficiency value."""
    return params.kp * e - params.kd * ydot - params.kaw * delta_u


class PdAwController:
    """PD tracker with the deficiency feedback solved per tick."""

    def __init__(self, params: PdAwParams | None = None):
        self.params = params or PdAwParams()
        self.state = PdAwState()

    def compute(self, t: float, r: float, meas: Measurement, r_at=None) -> float:
        p = self.params
        pd = p.kp * (r - meas.y) - p.kd * meas.ydot
        if p.kaw == 0.0:
            return pd
        # Exact solution of u_c = pd - kaw*(u_c - u_ac); the resulting
        # deficiency is (pd - u_ac)/(1 + kaw).
        delta = (pd - meas.u_ac) / (1.0 + p.kaw)
        return pd_aw_control(p, r - meas.y, meas.ydot, delta)

    def notify_actuation(self, u_c: float, u_ac: float) -> None:
        self.state = notify_actuation(self.state, u_c, u_ac)


# ---------------------------------------------------------------------------
# LQI with deficiency feedback at the integrator input
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LqiAwParams:
    """Tracking-signed integral gain, plant-state gain row and AW gain."""

    k_i: float
    k_xp: np.ndarray
    kaw: float = 4.0

    def __post_init__(self):
        k_xp = np.atleast_1d(np.asarray(self.k_xp, dtype=float))
        if k_xp.ndim != 1:
            raise ValueError("k_xp must be a gain row")
        if not (math.isfinite(self.k_i) and math.isfinite(self.kaw) and np.all(np.isfinite(k_xp))):
            raise ValueError("LQI gains must be finite")
        object.__setattr__(self, "k_xp", k_xp)


@dataclass(frozen=True)
class LqiAwState:
    e_I: float = 0.0
    delta_u_prev: float = 0.0


def lqi_aw_step(
    state: LqiAwState,
    params: LqiAwParams,
    e: float,
    x_p: np.ndarray,
    Ts: float,
) -> tuple[float, LqiAwState]:
    """One control update: integrate the gated error, then form the output.

    The integrator input is ``e - kaw*delta_u_prev``; a positive stored
    deficiency therefore slows (or reverses) the integration.
    """
    if not Ts > 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    x_p = np.asarray(x_p, dtype=float)
    if x_p.shape != params.k_xp.shape:
        raise ValueError(f"x_p shape {x_p.shape} does not match gain {params.k_xp.shape}")
    e_I = state.e_I + Ts * (e - params.kaw * state.delta_u_prev)
    u_c = params.k_i * e_I - float(params.k_xp @ x_p)
    return u_c, LqiAwState(e_I=e_I, delta_u_prev=state.delta_u_prev)


def design_lqi_aw(plant: StateSpace, Q, R, kaw: float = 4.0) -> LqiAwParams:
    """Synthesize LQI anti-windup gains from LQ weights.

    The regulator gain ``K = [K_I | K_xp]`` comes from the
    integral-augmented Riccati design; the tracking law uses ``-K_I`` on
    the integral of the error.  The unconstrained closed loop is verified
    to be Hurwitz before the parameters are returned.
    """
    k_i_reg, k_xp = lqi_gains(plant, Q, R)
    params = LqiAwParams(k_i=-k_i_reg, k_xp=k_xp, kaw=kaw)
    n = plant.n_states
    a_cl = np.zeros((n + 1, n + 1))
    a_cl[0, 1:] = -plant.C[0]
    a_cl[1:, 0] = plant.B[:, 0] * params.k_i
    a_cl[1:, 1:] = plant.A - np.outer(plant.B[:, 0], params.k_xp)
    if not is_hurwitz(a_cl):
        raise ValueError("unconstrained LQI closed loop is not Hurwitz")
    return params


class LqiAwController:
    """LQI tracker; the deficiency gates the error integrator."""

    def __init__(self, params: LqiAwParams, ts: float):
        if not ts > 0:
            raise ValueError(f"ts must be positive, got {ts}")
        self.params = params
        self.ts = ts
        self.state = LqiAwState()

    def compute(self, t: float, r: float, meas: Measurement, r_at=None) -> float:
        u_c, self.state = lqi_aw_step(self.state, self.params, r - meas.y, meas.x_p, self.ts)
        return u_c

    def notify_actuation(self, u_c: float, u_ac: float) -> None:
        self.state = notify_actuation(self.state, u_c, u_ac)


def notify_actuation(state, u_c: float, u_ac: float):
    """Record the control deficiency for use at the next control step.

    Applying the deficiency one sample late breaks the algebraic loop
    between the control law and the actuator.
    """
    return replace(state, delta_u_prev=u_c - u_ac)


# ---------------------------------------------------------------------------
# Classic cascade PID anti-windup family
# ---------------------------------------------------------------------------


class AwMode(Enum):
    NONE = "none"
    INTEGRAL_CLIPPING = "integral_clipping"
    CONDITIONAL_INTEGRATION = "conditional_integration"
    INTEGRATOR_CLAMPING = "integrator_clamping"
    BACK_CALCULATION = "back_calculation"


@dataclass(frozen=True)
class ClassicPidParams:
    kp: float = 8.0
    ki: float = 2.0
    kd: float = 6.0
    mode: AwMode = AwMode.NONE
    clip_limit: float = 16.0  # integrator-branch output limit (80% of u_max)
    kaw: float = 4.0

    def __post_init__(self):
        if not self.clip_limit > 0:
            raise ValueError(f"clip_limit must be positive, got {self.clip_limit}")


@dataclass(frozen=True)
class ClassicPidState:
    integral: float = 0.0  # integral of the (possibly gated) error


def _sign(x: float) -> float:
    return (x > 0) - (x < 0)


def classic_pid_step(
    state: ClassicPidState,
    params: ClassicPidParams,
    e: float,
    ydot: float,
    u_c_prev: float,
    u_ac_prev: float,
    Ts: float,
) -> tuple[float, ClassicPidState]:
    """Cascade PID with rate feedback: ``u_c = Kp e + I - Kd ydot``.

    The integrator branch behaves per ``params.mode``:

    * NONE: plain integration.
    * INTEGRAL_CLIPPING: the branch output ``Ki * integral`` is clamped
      to +-clip_limit (the stored integral is not).
    * CONDITIONAL_INTEGRATION: integration freezes whenever the previous
      command did not reach the actuator (u_ac_prev != u_c_prev).
    * INTEGRATOR_CLAMPING: freezes only when additionally the error
      drives further into saturation (sign(e) == sign(u_c_prev)).
    * BACK_CALCULATION: the integrator input is
      ``e - kaw*(u_c_prev - u_ac_prev)``.
    """
    if not Ts > 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    mode = params.mode
    saturated = u_ac_prev != u_c_prev

    e_int = e
    if mode is AwMode.CONDITIONAL_INTEGRATION and saturated:
        e_int = 0.0
    elif mode is AwMode.INTEGRATOR_CLAMPING and saturated and _sign(e) == _sign(u_c_prev):
        e_int = 0.0
    elif mode is AwMode.BACK_CALCULATION:
        e_int = e - params.kaw * (u_c_prev - u_ac_prev)

    integral = state.integral + Ts * e_int
    i_term = params.ki * integral
    if mode is AwMode.INTEGRAL_CLIPPING:
        i_term = max(-params.clip_limit, min(params.clip_limit, i_term))

    u_c = params.kp * e + i_term - params.kd * ydot
    return u_c, ClassicPidState(integral=integral)


class ClassicPidController:
    """Stateful wrapper tracking the previous command/actuation pair."""

    def __init__(self, params: ClassicPidParams, ts: float):
        if not ts > 0:
            raise ValueError(f"ts must be positive, got {ts}")
        self.params = params
        self.ts = ts
        self.state = ClassicPidState()
        self._u_c_prev = 0.0
        self._u_ac_prev = 0.0

    def compute(self, t: float, r: float, meas: Measurement, r_at=None) -> float:
        u_c, self.state = classic_pid_step(
            self.state, self.params, r - meas.y, meas.ydot,
            self._u_c_prev, self._u_ac_prev, self.ts,
        )
        return u_c

    def notify_actuation(self, u_c: float, u_ac: float) -> None:
        self._u_c_prev = u_c
        self._u_ac_prev = u_ac


# ---------------------------------------------------------------------------
# Dynamic model-based anti-windup compensator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MawCompensator:
    """Dynamic compensator driven by the deficiency:

        dx_aw/dt = (A + B f_aw) x_aw + B delta_u
        u_aw = f_aw . x_aw        (control-signal correction)
        y_aw = C . x_aw           (measurement correction)

    The feedback row ``f_aw`` is user-supplied; this package provides the
    runtime element only, no synthesis.
    """

    plant: StateSpace
    f_aw: np.ndarray
    x_aw: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        f_aw = np.atleast_1d(np.asarray(self.f_aw, dtype=float))
        n = self.plant.n_states
        if f_aw.shape != (n,):
            raise ValueError(f"f_aw must have shape ({n},), got {f_aw.shape}")
        x_aw = np.zeros(n) if self.x_aw is None else np.asarray(self.x_aw, dtype=float)
        if x_aw.shape != (n,):
            raise ValueError(f"x_aw must have shape ({n},), got {x_aw.shape}")
        if not (np.all(np.isfinite(f_aw)) and np.all(np.isfinite(x_aw))):
            raise ValueError("compensator data must be finite")
        object.__setattr__(self, "f_aw", f_aw)
        object.__setattr__(self, "x_aw", x_aw)

    @property
    def u_aw(self) -> float:
        return float(self.f_aw @ self.x_aw)

    @property
    def y_aw(self) -> float:
        return float(self.plant.C[0] @ self.x_aw)


def maw_step(comp: MawCompensator, delta_u: float, h: float) -> tuple[float, float, MawCompensator]:
    """Integrate the compensator one RK4 micro-step; returns (u_aw, y_aw, comp')."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    plant = comp.plant
    a_cl = plant.A + np.outer(plant.B[:, 0], comp.f_aw)
    b = plant.B[:, 0] * delta_u

    def f(x):
        return a_cl @ x + b

    x = comp.x_aw
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    x_new = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new = MawCompensator(plant=plant, f_aw=comp.f_aw, x_aw=x_new)
    return new.u_aw, new.y_aw, new
