"""Fixed-step closed-loop executor.

Timing is multirate: physics (actuator and plant) advance with a small
micro-step ``h`` while the controller runs every ``ts`` seconds and its
output is held over the control period.  The plant, being LTI, is
integrated with the exact one-step RK4 map (a 4th-order Taylor
polynomial of the matrix exponential applied once per micro-step); the
actuator uses forward Euler because its clamps are non-smooth.

Robustness perturbations live here: an injected transport delay acts on
the commanded signal (a FIFO of whole control samples) and a loop-gain
multiplier scales the actuated signal where it enters the plant, leaving
the controller's view of the actuator intact.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .actuator import ActuatorParams
from .control_math import StateSpace
from .controllers import Measurement

__all__ = [
    "Scenario",
    "SimConfig",
    "SimLog",
    "scenario_setpoint_at",
    "run_closed_loop",
    "rk4_step_maps",
]


@dataclass(frozen=True)
class Scenario:
    """Piecewise-constant setpoint profile: (start_time, setpoint) segments."""

    segments: tuple[tuple[float, float], ...]
    tf: float = 80.0

    def __post_init__(self):
        segs = tuple((float(t), float(r)) for t, r in self.segments)
        if not segs:
            raise ValueError("scenario needs at least one segment")
        if segs[0][0] != 0.0:
            raise ValueError("first segment must start at t = 0")
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must be strictly increasing")
        if not self.tf > starts[-1]:
            raise ValueError("tf must exceed the last segment start")
        object.__setattr__(self, "segments", segs)

    @property
    def max_abs_setpoint(self) -> float:
        return max(abs(r) for _, r in self.segments)


def scenario_setpoint_at(scenario: Scenario, t: float) -> float:
    """Setpoint active at time ``t``; a boundary belongs to the new segment."""
    if t < 0.0 or t > scenario.tf:
        raise ValueError(f"t = {t} outside [0, {scenario.tf}]")
    value = scenario.segments[0][1]
    for start, setpoint in scenario.segments:
        if t >= start:
            value = setpoint
        else:
            break
    return value


@dataclass(frozen=True)
class SimConfig:
    """Step sizes and robustness perturbations."""

    h: float = 0.001
    ts: float = 0.01
    gain_scale: float = 1.0
    injected_delay: float = 0.0

    def __post_init__(self):
        if not self.h > 0 or not self.ts > 0:
            raise ValueError("step sizes must be positive")
        ratio = self.ts / self.h
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"ts ({self.ts}) must be an integer multiple of h ({self.h})")
        if not self.gain_scale > 0:
            raise ValueError(f"gain_scale must be positive, got {self.gain_scale}")
        if self.injected_delay < 0:
            raise ValueError(f"injected_delay must be >= 0, got {self.injected_delay}")

    @property
    def substeps(self) -> int:
        return int(round(self.ts / self.h))

    @property
    def delay_samples(self) -> int:
        return int(round(self.injected_delay / self.ts))


@dataclass
class SimLog:
    """Control-rate samples of one closed-loop run."""

    t: np.ndarray
    r: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    u_c: np.ndarray
    u_ac: np.ndarray
    e: np.ndarray
    diverged: bool = False
    ts: float = 0.01
    tf: float = 80.0

    def __len__(self) -> int:
        return len(self.t)


def rk4_step_maps(A: np.ndarray, B: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One-step RK4 transition maps for dx/dt = A x + B u with u held.

    For an LTI system the classical RK4 step collapses to constant
    matrices: x+ = Phi x + Gam u with Phi, Gam the 4th-order Taylor
    truncations of the exact ZOH maps.
    """
    n = A.shape[0]
    Ah = A * h
    phi = np.eye(n) + Ah + Ah @ Ah / 2.0 + Ah @ Ah @ Ah / 6.0 + Ah @ Ah @ Ah @ Ah / 24.0
    gam = (
        np.eye(n) * h + A * h**2 / 2.0 + A @ A * h**3 / 6.0 + A @ A @ A * h**4 / 24.0
    ) @ B
    return phi, gam[:, 0]


@njit(cache=True)
def _integrate_tick(x, u_ac, u_cmd, gain, phi, gam, n_sub, h, tau, u_max, rate_max):
    for _ in range(n_sub):
        target = u_cmd
        if target > u_max:
            target = u_max
        elif target < -u_max:
            target = -u_max
        v = (target - u_ac) / tau
        if v > rate_max:
            v = rate_max
        elif v < -rate_max:
            v = -rate_max
        u_ac = u_ac + h * v
        if u_ac > u_max:
            u_ac = u_max
        elif u_ac < -u_max:
            u_ac = -u_max
        x = phi @ x + gam * (gain * u_ac)
    return x, u_ac


def run_closed_loop(
    plant: StateSpace,
    controller,
    actuator: ActuatorParams,
    scenario: Scenario,
    config: SimConfig | None = None,
) -> SimLog:
    """Simulate the loop and log every control tick.

    Per tick: sample the setpoint, let the controller compute ``u_c``
    from the current measurement, log, push ``u_c`` through the delay
    FIFO, integrate physics over one control period, then report
    ``(u_c, u_ac)`` back to the controller.  The run aborts early (with
    the ``diverged`` flag) on non-finite signals or when ``|y|`` exceeds
    three times the largest setpoint magnitude.
    """
    config = config or SimConfig()
    n_steps = int(math.floor(scenario.tf / config.ts + 1e-9))
    n_sub = config.substeps
    phi, gam = rk4_step_maps(plant.A, plant.B, config.h)

    max_r = scenario.max_abs_setpoint
    div_threshold = 3.0 * max_r if max_r > 0 else math.inf

    fifo = deque([0.0] * config.delay_samples)
    x = np.zeros(plant.n_states)
    u_ac = 0.0

    def r_at(tt: float) -> float:
        return scenario_setpoint_at(scenario, min(max(tt, 0.0), scenario.tf))

    cols = {name: np.empty(n_steps + 1) for name in ("t", "r", "y", "ydot", "u_c", "u_ac")}
    diverged = False
    k_last = n_steps

    for k in range(n_steps + 1):
        t = k * config.ts
        r = scenario_setpoint_at(scenario, t)
        y = float(x[0])
        ydot = float(x[1]) if plant.n_states > 1 else 0.0
        meas = Measurement(y=y, ydot=ydot, x_p=x, u_ac=u_ac)
        u_c = controller.compute(t, r, meas, r_at)

        cols["t"][k] = t
        cols["r"][k] = r
        cols["y"][k] = y
        cols["ydot"][k] = ydot
        cols["u_c"][k] = u_c
        cols["u_ac"][k] = u_ac
        if k == n_steps:
            break

        if not math.isfinite(u_c) or abs(y) > div_threshold:
            diverged = True
            k_last = k
            break

        if fifo:
            fifo.append(u_c)
            u_cmd = fifo.popleft()
        else:
            u_cmd = u_c
        x, u_ac = _integrate_tick(
            x, u_ac, u_cmd, config.gain_scale, phi, gam,
            n_sub, config.h, actuator.tau, actuator.u_max, actuator.rate_max,
        )
        controller.notify_actuation(u_c, u_ac)
        if not np.all(np.isfinite(x)):
            diverged = True
            k_last = k
            break

    end = k_last + 1
    data = {name: col[:end].copy() for name, col in cols.items()}
    return SimLog(
        t=data["t"],
        r=data["r"],
        y=data["y"],
        ydot=data["ydot"],
        u_c=data["u_c"],
        u_ac=data["u_ac"],
        e=data["r"] - data["y"],
        diverged=diverged,
        ts=config.ts,
        tf=scenario.tf,
    )
