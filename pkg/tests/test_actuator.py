import math

import numpy as np
import pytest

from awbench.actuator import ActuatorParams, ActuatorState, actuator_step, saturate


class TestSaturate:
    @pytest.mark.parametrize("x,limit,expected", [(25.0, 20.0, 20.0), (-25.0, 20.0, -20.0), (5.0, 20.0, 5.0)])
    def test_clamps(self, x, limit, expected):
        assert saturate(x, limit) == expected

    def test_requires_positive_limit(self):
        with pytest.raises(ValueError):
            saturate(1.0, 0.0)


class TestActuatorStep:
    def test_rate_limited_first_step(self):
        # Demanded rate (20 - 0)/0.1 = 200 deg/s clamps to 30, so one
        # 10 ms step moves the deflection by 0.3 deg.
        state = actuator_step(ActuatorState(0.0), ActuatorParams(), u_c=100.0, h=0.01)
        assert state.u_ac == pytest.approx(0.3, abs=1e-15)

    def test_zero_command_equilibrium(self):
        state = actuator_step(ActuatorState(0.0), ActuatorParams(), u_c=0.0, h=0.01)
        assert state.u_ac == 0.0

    def test_interior_equilibrium(self):
        state = actuator_step(ActuatorState(5.0), ActuatorParams(), u_c=5.0, h=0.01)
        assert state.u_ac == 5.0

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            actuator_step(ActuatorState(0.0), ActuatorParams(), u_c=1.0, h=0.0)

    def test_limits_hold_for_random_commands(self, rng):
        params = ActuatorParams()
        h = 0.001
        state = ActuatorState(0.0)
        prev = state.u_ac
        for _ in range(5000):
            u_c = float(rng.uniform(-200, 200))
            state = actuator_step(state, params, u_c, h)
            assert abs(state.u_ac) <= params.u_max + 1e-12
            assert abs(state.u_ac - prev) <= params.rate_max * h + 1e-12
            prev = state.u_ac

    def test_unbounded_lag_converges_in_five_time_constants(self):
        params = ActuatorParams(tau=0.1, u_max=math.inf, rate_max=math.inf)
        h = 0.001
        state = ActuatorState(0.0)
        target = 50.0
        for _ in range(int(5 * params.tau / h)):
            state = actuator_step(state, params, target, h)
        assert abs(state.u_ac - target) <= 0.01 * abs(target)

    def test_monotone_rise_toward_constant_command(self):
        params = ActuatorParams()
        state = ActuatorState(-10.0)
        values = []
        for _ in range(2000):
            state = actuator_step(state, params, 15.0, 0.001)
            values.append(state.u_ac)
        diffs = np.diff(np.array(values))
        assert np.all(diffs >= -1e-15)
