"""First-order servo with amplitude and rate limits.

The actuator is the single place where the commanded signal ``u_c`` turns
into the actuated signal ``u_ac``.  The update per micro-step is:

1. amplitude-clamp the command,
2. first-order lag toward the clamped command,
3. rate-clamp the resulting slew,
4. forward-Euler integrate and amplitude-clamp the state.

Forward Euler is used deliberately: the clamps make the dynamics
non-smooth, and the micro-step is much smaller than the lag constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["ActuatorParams", "ActuatorState", "saturate", "actuator_step"]


def saturate(x: float, limit: float) -> float:
    """Clamp ``x`` to the symmetric interval [-limit, +limit]."""
    if not limit > 0:
        raise ValueError(f"saturation limit must be positive, got {limit}")
    return -limit if x < -limit else (limit if x > limit else x)


@dataclass(frozen=True)
class ActuatorParams:
    """Servo lag constant and deflection/rate limits (degrees, seconds).

    ``math.inf`` limits give the plain first-order lag.
    """

    tau: float = 0.1
    u_max: float = 20.0
    rate_max: float = 30.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.u_max > 0:
            raise ValueError(f"u_max must be positive, got {self.u_max}")
        if not self.rate_max > 0:
            raise ValueError(f"rate_max must be positive, got {self.rate_max}")


@dataclass(frozen=True)
class ActuatorState:
    """Current actuated deflection (degrees)."""

    u_ac: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.u_ac):
            raise ValueError("u_ac must be finite")


def actuator_step(
    state: ActuatorState, params: ActuatorParams, u_c: float, h: float
) -> ActuatorState:
    """Advance the servo one Euler micro-step of length ``h`` seconds."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    target = saturate(u_c, params.u_max)
    v = saturate((target - state.u_ac) / params.tau, params.rate_max)
    return ActuatorState(u_ac=saturate(state.u_ac + h * v, params.u_max))
