import logging
import math
from collections.abc import Callable

import numpy as np

from cipherloop.core.exceptions import ConfigurationError
from cipherloop.models.enums import DisturbanceKind, DisturbanceTarget, Preset
from cipherloop.models.plant import Actuator, Disturbance, LoopPreset
from cipherloop.schemas.config import LoopConfig
from cipherloop.schemas.controller import ControllerDesign
from cipherloop.services.plant_service import (
    ALPHA_UPRIGHT_COUNTS,
    rotary_pendulum_surrogate,
    scalar_plant,
)

logger = logging.getLogger(__name__)

# rad-per-count conversion folded into the pendulum gains: 125*pi/3072
QUBE_GAIN_FACTOR = 125.0 * math.pi / 3072.0
QUBE_DUTY_LIMIT = 999


def qube_design() -> ControllerDesign:
    c = QUBE_GAIN_FACTOR
    return ControllerDesign(
        name=Preset.QUBE.value,
        A=[
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [500.0 * c, 0.0, 625.0 * c, 0.0],
        ],
        B=[
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
        ],
        C=[[-500.0 * c, -2.0 * c, -655.0 * c, 1.0]],
        T=None,
        n=20,
        m=7,
        n_prime=32,
        signal_exp=0,
    )


def qube_preset(theta_setpoint: float = 0.0) -> LoopPreset:
    """Pendulum controller with a surrogate plant; y = [theta, theta, alpha], s = [0, theta_s, 1024]."""
    return LoopPreset(
        name=Preset.QUBE.value,
        design=qube_design(),
        plant=rotary_pendulum_surrogate(),
        measurement_map=np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        setpoint=(0.0, float(theta_setpoint), float(ALPHA_UPRIGHT_COUNTS)),
        actuator=Actuator(lo=-QUBE_DUTY_LIMIT, hi=QUBE_DUTY_LIMIT, integer=True),
        disturbances=(
            Disturbance(
                step=250,
                channel=1,
                magnitude=0.02,
                kind=DisturbanceKind.IMPULSE,
                target=DisturbanceTarget.STATE,
            ),
        ),
        default_key_bits=256,
        sample_period_us=2000,
        notes={"plant": "surrogate parameters, not identified from hardware"},
    )


def static_preset() -> LoopPreset:
    return LoopPreset(
        name=Preset.STATIC.value,
        design=ControllerDesign(
            name=Preset.STATIC.value,
            A=[[0.0]],
            B=[[1.0]],
            C=[[0.25]],
            T=None,
            n=8,
            m=4,
            n_prime=16,
            signal_exp=1,
        ),
        plant=scalar_plant(0.5, 1.0),
        measurement_map=np.eye(1),
        setpoint=(1.0,),
        actuator=Actuator(lo=-10.0, hi=10.0),
        disturbances=(
            Disturbance(step=40, channel=0, magnitude=0.25, kind=DisturbanceKind.STEP),
        ),
        default_key_bits=64,
        sample_period_us=2000,
    )


def reset_pi_design(
    dt: float = 0.002, k_i: float = 1.0, k_p: float = 2.0, T: int | None = 4, m: int = 8
) -> ControllerDesign:
    return ControllerDesign(
        name=Preset.RESET_PI.value,
        A=[[1.0, 0.0], [0.0, 0.0]],
        B=[[dt], [1.0]],
        C=[[k_i, k_p]],
        T=T,
        n=16,
        m=m,
        n_prime=48,
        signal_exp=1,
    )


def reset_pi_preset() -> LoopPreset:
    return LoopPreset(
        name=Preset.RESET_PI.value,
        design=reset_pi_design(),
        plant=scalar_plant(0.9, 0.1),
        measurement_map=np.eye(1),
        setpoint=(1.0,),
        actuator=Actuator(lo=-100.0, hi=100.0),
        default_key_bits=256,
        sample_period_us=2000,
    )


PRESETS: dict[Preset, Callable[[], LoopPreset]] = {
    Preset.STATIC: static_preset,
    Preset.RESET_PI: reset_pi_preset,
    Preset.QUBE: qube_preset,
}


def build_preset(
    name: Preset | str,
    *,
    n: int | None = None,
    m: int | None = None,
    n_prime: int | None = None,
    T: int | str | None = None,
    sample_period_us: int | None = None,
    noise_std: float | None = None,
) -> LoopPreset:
    try:
        preset = PRESETS[Preset(name)]()
    except ValueError as e:
        raise ConfigurationError(f"Unknown preset {name!r}") from e

    updates: dict[str, object] = {}
    if noise_std is not None and noise_std < 0:
        raise ConfigurationError(f"Sensor noise std must be non-negative, got {noise_std}")

    if n is not None:
        updates["n"] = n
    if m is not None:
        updates["m"] = m
    if n_prime is not None:
        updates["n_prime"] = n_prime
    if T is not None:
        updates["T"] = None if T == "inf" else T

    design = preset.design
    if updates:
        # bypass validation so the config validator can report inconsistent codecs
        design = design.model_copy(update=updates)
        logger.debug(f"Preset {preset.name} overrides: {updates}")

    return LoopPreset(
        name=preset.name,
        design=design,
        plant=preset.plant,
        measurement_map=preset.measurement_map,
        setpoint=preset.setpoint,
        actuator=preset.actuator,
        disturbances=preset.disturbances,
        default_key_bits=preset.default_key_bits,
        sample_period_us=sample_period_us or preset.sample_period_us,
        noise_std=preset.noise_std if noise_std is None else noise_std,
        notes=preset.notes,
    )


def preset_from_config(config: LoopConfig) -> LoopPreset:
    return build_preset(
        config.preset,
        n=config.n,
        m=config.m,
        n_prime=config.n_prime,
        T=config.T,
        sample_period_us=config.sample_period_us,
        noise_std=config.noise_std,
    )
