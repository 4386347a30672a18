"""Benchmark criteria: tracking/control-activity metrics and
simulation-based gain and delay margins.

Margins are measured on the nonlinear closed loop by perturbing a run
(loop-gain multiplier at the plant input, transport delay at the
controller output) and bisecting on the largest perturbation for which
the run still settles according to ``detect_instability``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .actuator import ActuatorParams
from .control_math import StateSpace
from .simulation import Scenario, SimConfig, SimLog, run_closed_loop

__all__ = [
    "Metrics",
    "MetricsUnavailableError",
    "NominalUnstableError",
    "BenchmarkSetup",
    "compute_metrics",
    "detect_instability",
    "estimate_gain_margin",
    "estimate_delay_margin",
    "GM_CAP",
    "DM_CAP",
]

GM_CAP = 10.5
GM_TOL = 0.05
DM_CAP = 3.0

_trapezoid = getattr(np, "trapezoid", np.trapz)


class MetricsUnavailableError(Exception):
    """Metrics are undefined for a diverged run."""


class NominalUnstableError(Exception):
    """Margin estimation requires a stable unperturbed run."""


@dataclass(frozen=True)
class Metrics:
    """The five comparison criteria; margins are None until estimated."""

    ise: float
    iace: float
    iacer: float
    gm: float | None = None
    gm_exceeds_cap: bool | None = None
    dm: float | None = None
    dm_exceeds_cap: bool | None = None


def compute_metrics(log: SimLog) -> Metrics:
    """Time-normalized tracking error, control effort and control rate.

    ISE and IACE use trapezoidal integration at the control period; the
    control-rate integral of ``|du/dt|`` with first-difference rates
    telescopes to the total variation of the actuated signal.  All three
    are divided by the scenario duration.
    """
    if log.diverged:
        raise MetricsUnavailableError("metrics are unavailable for a diverged run")
    ise = float(_trapezoid(log.e**2, dx=log.ts)) / log.tf
    iace = float(_trapezoid(np.abs(log.u_ac), dx=log.ts)) / log.tf
    iacer = float(np.sum(np.abs(np.diff(log.u_ac)))) / log.tf
    return Metrics(ise=ise, iace=iace, iacer=iacer)


def detect_instability(log: SimLog, scenario: Scenario) -> bool:
    """True when the run diverged, went non-finite, or failed to settle.

    Settling is judged on the final setpoint segment: over its last 25%
    the error magnitude must come under 20% of the final step amplitude.
    A bounded limit cycle larger than that threshold counts as unstable.
    """
    if log.diverged:
        return True
    for arr in (log.y, log.u_c, log.u_ac):
        if not np.all(np.isfinite(arr)):
            return True
    t_last, r_last = scenario.segments[-1]
    r_prev = scenario.segments[-2][1] if len(scenario.segments) >= 2 else 0.0
    amplitude = abs(r_last - r_prev)
    t0 = t_last + 0.75 * (scenario.tf - t_last)
    i0 = int(round(t0 / log.ts))
    if i0 >= len(log.t):
        return True
    return bool(np.max(np.abs(log.e[i0:])) > 0.2 * amplitude)


@dataclass(frozen=True)
class BenchmarkSetup:
    """Everything needed to run one controller's benchmark repeatedly.

    ``controller_factory`` must build a fresh controller instance per
    call; margin sweeps run many independent loops.
    """

    plant: StateSpace
    controller_factory: Callable[[], object]
    actuator: ActuatorParams
    scenario: Scenario
    config: SimConfig


def run_setup(setup: BenchmarkSetup, gain_scale: float = 1.0, injected_delay: float = 0.0) -> SimLog:
    config = replace(setup.config, gain_scale=gain_scale, injected_delay=injected_delay)
    return run_closed_loop(setup.plant, setup.controller_factory(), setup.actuator, setup.scenario, config)


def _is_stable(setup: BenchmarkSetup, gain_scale: float = 1.0, injected_delay: float = 0.0) -> bool:
    return not detect_instability(run_setup(setup, gain_scale, injected_delay), setup.scenario)


def estimate_gain_margin(
    setup: BenchmarkSetup, cap: float = GM_CAP, tol: float = GM_TOL
) -> tuple[float, bool]:
    """Largest plant-input gain multiplier with a settling run.

    Bisection on [1, cap] to within ``tol``; returns ``(cap, True)``
    when the loop still settles at the cap.
    """
    if not _is_stable(setup):
        raise NominalUnstableError("nominal run is unstable; gain margin undefined")
    if _is_stable(setup, gain_scale=cap):
        return cap, True
    lo, hi = 1.0, cap
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _is_stable(setup, gain_scale=mid):
            lo = mid
        else:
            hi = mid
    return lo, False


def estimate_delay_margin(setup: BenchmarkSetup, cap: float = DM_CAP) -> tuple[float, bool]:
    """Largest injected transport delay (whole control samples) that settles.

    Bisection on the sample count; resolution is one control period.
    """
    if not _is_stable(setup):
        raise NominalUnstableError("nominal run is unstable; delay margin undefined")
    ts = setup.config.ts
    cap_samples = int(round(cap / ts))
    if _is_stable(setup, injected_delay=cap_samples * ts):
        return cap_samples * ts, True
    lo, hi = 0, cap_samples
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _is_stable(setup, injected_delay=mid * ts):
            lo = mid
        else:
            hi = mid
    return lo * ts, False
