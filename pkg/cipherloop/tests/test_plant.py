import math

import numpy as np
import pytest

from cipherloop.core.exceptions import ConfigurationError, ParameterError
from cipherloop.models.enums import DisturbanceKind, DisturbanceTarget, LoopMode
from cipherloop.models.plant import Actuator, Disturbance, PlantModel
from cipherloop.services.loop_service import run_closed_loop
from cipherloop.services.plant_service import (
    apply_actuator,
    clamp_round,
    discretize,
    plant_output,
    plant_step,
    rotary_pendulum_surrogate,
    scalar_plant,
)
from cipherloop.services.presets import build_preset


class TestPlantStep:

    def test_scalar_plant_three_steps(self):
        model = scalar_plant(0.5, 1.0)
        x = np.zeros(1)

        for k in range(3):
            x, _ = plant_step(model, x, [1.0], k)

        assert x[0] == pytest.approx(1.75)

    def test_output_sampled_before_update(self):
        model = scalar_plant(0.5, 1.0)

        x_next, y = plant_step(model, np.array([2.0]), [0.0])
        assert y[0] == 2.0
        assert x_next[0] == 1.0

    def test_wrong_input_length(self):
        with pytest.raises(ParameterError):
            plant_step(scalar_plant(0.5, 1.0), np.zeros(1), [1.0, 2.0])

    def test_invalid_model_shapes(self):
        with pytest.raises(ValueError):
            PlantModel(a=np.zeros((2, 3)), b=np.zeros((2, 1)), c=np.zeros((1, 2)), dt=0.01)
        with pytest.raises(ValueError):
            PlantModel(a=np.zeros((1, 1)), b=np.zeros((1, 1)), c=np.zeros((1, 1)), dt=0.0)


class TestDisturbances:

    def test_impulse_and_step(self):
        impulse = Disturbance(step=5, channel=0, magnitude=2.0)
        step = Disturbance(step=5, channel=0, magnitude=2.0, kind=DisturbanceKind.STEP)

        assert [impulse.contribution(k) for k in (4, 5, 6)] == [0.0, 2.0, 0.0]
        assert [step.contribution(k) for k in (4, 5, 6)] == [0.0, 2.0, 2.0]

    def test_state_disturbance_enters_next_state(self):
        model = scalar_plant(1.0, 0.0)
        kick = Disturbance(step=0, channel=0, magnitude=0.5, target=DisturbanceTarget.STATE)

        x_next, y = plant_step(model, np.zeros(1), [0.0], 0, (kick,))
        assert y[0] == 0.0
        assert x_next[0] == 0.5

    def test_channel_out_of_range(self):
        bad = Disturbance(step=0, channel=3, magnitude=1.0)

        with pytest.raises(ParameterError):
            plant_output(scalar_plant(0.5, 1.0), np.zeros(1), 0, (bad,))


class TestActuator:

    @pytest.mark.parametrize(
        "u,expected",
        [(1000.2, 999), (0.4, 0), (-999.7, -999), (2.5, 3), (-2.5, -3), (-0.5, -1), (12.49, 12)],
    )
    def test_clamp_round(self, u, expected):
        assert clamp_round(u, -999, 999) == expected

    def test_empty_range(self):
        with pytest.raises(ParameterError):
            clamp_round(0.0, 1.0, -1.0)

    def test_continuous_actuator_clamps(self):
        assert apply_actuator(Actuator(lo=-10.0, hi=10.0), [12.5, -3.25]) == [10.0, -3.25]

    def test_integer_actuator_rounds(self):
        assert apply_actuator(Actuator(lo=-999, hi=999, integer=True), [1.5, -2000.0]) == [2.0, -999.0]


class TestPendulumSurrogate:

    def test_discretize_scalar(self):
        a_d, b_d = discretize(np.array([[-1.0]]), np.array([[1.0]]), 0.1)

        assert a_d[0, 0] == pytest.approx(math.exp(-0.1))
        assert b_d[0, 0] == pytest.approx(1.0 - math.exp(-0.1))

    def test_shapes_and_upright_offset(self):
        model = rotary_pendulum_surrogate()

        assert model.a.shape == (4, 4)
        assert model.b.shape == (4, 1)
        assert model.c.shape == (2, 4)
        assert list(plant_output(model, np.zeros(4))) == [0.0, 1024.0]

    def test_outputs_are_encoder_counts(self):
        model = rotary_pendulum_surrogate()
        y = plant_output(model, np.array([0.01, 0.02, 0.0, 0.0]))

        assert all(float(v).is_integer() for v in y)
        assert y[1] < 1024.0

    def test_upright_equilibrium_is_unstable(self):
        model = rotary_pendulum_surrogate()

        assert max(abs(np.linalg.eigvals(model.a))) > 1.0


class TestPresets:

    def test_pendulum_wiring(self, qube_loop):
        assert qube_loop.measurement_map.shape == (3, 2)
        assert qube_loop.setpoint == (0.0, 0.0, 1024.0)
        assert qube_loop.design.T is None
        assert qube_loop.actuator.integer

    def test_overrides(self):
        preset = build_preset("reset_pi", T="inf", n_prime=40, sample_period_us=5000)

        assert preset.design.T is None
        assert preset.design.n_prime == 40
        assert preset.sample_period_us == 5000

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            build_preset("segway")

    def test_static_loop_stays_bounded(self, static_loop):
        result = run_closed_loop(static_loop, LoopMode.REAL, steps=10_000)

        outputs = np.array([row.outputs[0] for row in result.rows])
        assert np.all(np.isfinite(outputs))
        assert np.max(np.abs(outputs)) < 5.0
        # proportional loop against a 0.25 output step settles at y = 0.5
        assert outputs[-1] == pytest.approx(0.5, abs=0.1)
