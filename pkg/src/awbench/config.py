"""YAML run configuration.

A config document is a nested mapping of sections; every key is
optional and missing values fall back to the benchmark defaults.
Unknown keys are rejected by name so typos cannot silently disable a
setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .actuator import ActuatorParams
from .benchmark import (
    BENCHMARK_CONTROLLERS,
    ALL_CONTROLLERS,
    default_lqi_weights,
    default_mpc_params,
    default_scenario,
)
from .analysis import DM_CAP, GM_CAP
from .controllers import AwMode, ClassicPidParams, PdAwParams
from .mpc import MpcParams
from .simulation import Scenario, SimConfig

__all__ = ["ConfigError", "LqiConfig", "RunConfig", "parse_config"]


class ConfigError(Exception):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class LqiConfig:
    """Diagonal LQ weights on [error integral, output, rate] plus AW gain."""

    q_diag: tuple[float, float, float] = (1000.0, 50.0, 25.0)
    r: float = 1.0
    kaw: float = 4.0

    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        return np.diag(self.q_diag), np.array([[self.r]])


@dataclass(frozen=True)
class RunConfig:
    controllers: tuple[str, ...] = BENCHMARK_CONTROLLERS
    actuator: ActuatorParams = field(default_factory=ActuatorParams)
    sim: SimConfig = field(default_factory=SimConfig)
    scenario: Scenario = field(default_factory=default_scenario)
    pd_aw: PdAwParams = field(default_factory=PdAwParams)
    lqi_aw: LqiConfig = field(default_factory=LqiConfig)
    classic_pid: ClassicPidParams = field(default_factory=ClassicPidParams)
    mpc: MpcParams = field(default_factory=default_mpc_params)
    mpc_preview: bool = False
    gm_cap: float = GM_CAP
    dm_cap: float = DM_CAP


def _require_mapping(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section '{path}' must be a mapping")
    return value


def _check_keys(section: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}' in section '{path}'")


def _number(section: dict, key: str, default: float, path: str) -> float:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{path}.{key}' must be a number, got {value!r}")
    return float(value)


def _build(doc: dict) -> RunConfig:
    _check_keys(
        doc,
        {"controllers", "actuator", "sim", "scenario", "pd_aw", "lqi_aw",
         "classic_pid", "mpc", "margins"},
        "<root>",
    )

    controllers = doc.get("controllers", list(BENCHMARK_CONTROLLERS))
    if not isinstance(controllers, (list, tuple)) or not controllers:
        raise ConfigError("'controllers' must be a non-empty list")
    for name in controllers:
        if name not in ALL_CONTROLLERS:
            raise ConfigError(
                f"unknown controller '{name}'; expected one of {list(ALL_CONTROLLERS)}"
            )

    sec = _require_mapping(doc.get("actuator"), "actuator")
    _check_keys(sec, {"tau", "u_max", "rate_max"}, "actuator")
    try:
        actuator = ActuatorParams(
            tau=_number(sec, "tau", 0.1, "actuator"),
            u_max=_number(sec, "u_max", 20.0, "actuator"),
            rate_max=_number(sec, "rate_max", 30.0, "actuator"),
        )
    except ValueError as exc:
        raise ConfigError(f"actuator: {exc}") from exc

    sec = _require_mapping(doc.get("sim"), "sim")
    _check_keys(sec, {"h", "ts"}, "sim")
    try:
        sim = SimConfig(h=_number(sec, "h", 0.001, "sim"), ts=_number(sec, "ts", 0.01, "sim"))
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    sec = _require_mapping(doc.get("scenario"), "scenario")
    _check_keys(sec, {"tf", "segments"}, "scenario")
    default_scen = default_scenario()
    segments = sec.get("segments")
    try:
        if segments is None:
            segments = default_scen.segments
        else:
            segments = tuple((float(t), float(r)) for t, r in segments)
        scenario = Scenario(segments=segments, tf=_number(sec, "tf", default_scen.tf, "scenario"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    sec = _require_mapping(doc.get("pd_aw"), "pd_aw")
    _check_keys(sec, {"kp", "kd", "kaw"}, "pd_aw")
    try:
        pd_aw = PdAwParams(
            kp=_number(sec, "kp", 8.0, "pd_aw"),
            kd=_number(sec, "kd", 6.0, "pd_aw"),
            kaw=_number(sec, "kaw", 4.0, "pd_aw"),
        )
    except ValueError as exc:
        raise ConfigError(f"pd_aw: {exc}") from exc

    sec = _require_mapping(doc.get("lqi_aw"), "lqi_aw")
    _check_keys(sec, {"q", "r", "kaw"}, "lqi_aw")
    q = sec.get("q", list(LqiConfig().q_diag))
    if not isinstance(q, (list, tuple)) or len(q) != 3:
        raise ConfigError("'lqi_aw.q' must be a list of three diagonal weights")
    try:
        lqi_aw = LqiConfig(
            q_diag=tuple(float(v) for v in q),
            r=_number(sec, "r", 1.0, "lqi_aw"),
            kaw=_number(sec, "kaw", 4.0, "lqi_aw"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"lqi_aw: {exc}") from exc
    if lqi_aw.r <= 0:
        raise ConfigError("lqi_aw: control weight r must be positive")

    sec = _require_mapping(doc.get("classic_pid"), "classic_pid")
    _check_keys(sec, {"kp", "ki", "kd", "mode", "clip_limit", "kaw"}, "classic_pid")
    mode_name = sec.get("mode", AwMode.NONE.value)
    try:
        mode = AwMode(mode_name)
    except ValueError as exc:
        raise ConfigError(
            f"classic_pid: unknown mode '{mode_name}'; expected one of "
            f"{[m.value for m in AwMode]}"
        ) from exc
    try:
        classic = ClassicPidParams(
            kp=_number(sec, "kp", 8.0, "classic_pid"),
            ki=_number(sec, "ki", 2.0, "classic_pid"),
            kd=_number(sec, "kd", 6.0, "classic_pid"),
            mode=mode,
            clip_limit=_number(sec, "clip_limit", 16.0, "classic_pid"),
            kaw=_number(sec, "kaw", 4.0, "classic_pid"),
        )
    except ValueError as exc:
        raise ConfigError(f"classic_pid: {exc}") from exc

    sec = _require_mapping(doc.get("mpc"), "mpc")
    _check_keys(sec, {"ny", "nu", "lambda", "u_max", "du_max", "preview"}, "mpc")
    mpc_default = default_mpc_params(sim.ts)
    nu = sec.get("nu", mpc_default.nu)
    preview = sec.get("preview", False)
    if not isinstance(preview, bool):
        raise ConfigError("'mpc.preview' must be a boolean")
    try:
        mpc = MpcParams(
            ts=sim.ts,
            ny=int(sec.get("ny", mpc_default.ny)),
            nu=None if nu is None else int(nu),
            lam=_number(sec, "lambda", mpc_default.lam, "mpc"),
            u_max=_number(sec, "u_max", mpc_default.u_max, "mpc"),
            du_max=_number(sec, "du_max", mpc_default.du_max, "mpc"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"mpc: {exc}") from exc

    sec = _require_mapping(doc.get("margins"), "margins")
    _check_keys(sec, {"gm_cap", "dm_cap"}, "margins")
    gm_cap = _number(sec, "gm_cap", GM_CAP, "margins")
    dm_cap = _number(sec, "dm_cap", DM_CAP, "margins")
    if gm_cap <= 1 or dm_cap <= 0:
        raise ConfigError("margins: gm_cap must exceed 1 and dm_cap must be positive")

    return RunConfig(
        controllers=tuple(controllers),
        actuator=actuator,
        sim=sim,
        scenario=scenario,
        pd_aw=pd_aw,
        lqi_aw=lqi_aw,
        classic_pid=classic,
        mpc=mpc,
        mpc_preview=preview,
        gm_cap=gm_cap,
        dm_cap=dm_cap,
    )


def parse_config(text: str | None) -> RunConfig:
    """Parse a YAML config document; an empty document gives the defaults."""
    if text is None or text.strip() == "":
        return RunConfig()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"invalid YAML{where}: {exc}") from exc
    if doc is None:
        return RunConfig()
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping of sections")
    return _build(doc)
