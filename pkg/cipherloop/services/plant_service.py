import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from cipherloop.core.exceptions import ParameterError
from cipherloop.models.enums import DisturbanceTarget
from cipherloop.models.plant import Actuator, Disturbance, PlantModel

logger = logging.getLogger(__name__)

ENCODER_COUNTS_PER_REV = 2048
ALPHA_UPRIGHT_COUNTS = 1024


def _disturbance_vector(
    disturbances: Sequence[Disturbance], target: DisturbanceTarget, size: int, k: int
) -> np.ndarray:
    vector = np.zeros(size)
    for d in disturbances:
        if d.target is target:
            if not 0 <= d.channel < size:
                raise ParameterError(f"Disturbance channel {d.channel} out of range for {size} channels")
            vector[d.channel] += d.contribution(k)
    return vector


def plant_output(
    model: PlantModel,
    x_p: np.ndarray,
    k: int = 0,
    disturbances: Sequence[Disturbance] = (),
    noise: np.ndarray | None = None,
) -> np.ndarray:
    if x_p.shape != (model.n_states,):
        raise ParameterError(f"Plant state must have length {model.n_states}")

    y = model.c @ x_p
    if model.output_offset is not None:
        y = y + model.output_offset
    y = y + _disturbance_vector(disturbances, DisturbanceTarget.OUTPUT, model.n_outputs, k)
    if noise is not None:
        y = y + noise
    if model.encoder_rounding:
        y = np.rint(y)
    return y


def plant_step(
    model: PlantModel,
    x_p: np.ndarray,
    u: Sequence[float] | np.ndarray,
    k: int = 0,
    disturbances: Sequence[Disturbance] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Advance one sample with u held constant; returns the next state and the output sampled at x_p."""
    u_vec = np.asarray(u, dtype=float)
    if u_vec.shape != (model.n_inputs,):
        raise ParameterError(f"Plant input must have length {model.n_inputs}")

    y = plant_output(model, x_p, k, disturbances)
    x_next = model.a @ x_p + model.b @ u_vec
    x_next = x_next + _disturbance_vector(disturbances, DisturbanceTarget.STATE, model.n_states, k)
    return x_next, y


def clamp_round(u: float, lo: float, hi: float) -> int:
    if lo > hi:
        raise ParameterError(f"Empty actuator range [{lo}, {hi}]")
    nearest = math.floor(abs(u) + 0.5)
    if u < 0:
        nearest = -nearest
    return int(min(max(nearest, math.ceil(lo)), math.floor(hi)))


def apply_actuator(actuator: Actuator, u: Sequence[float]) -> list[float]:
    if actuator.integer:
        return [float(clamp_round(v, actuator.lo, actuator.hi)) for v in u]
    return [min(max(v, actuator.lo), actuator.hi) for v in u]


def discretize(a_c: np.ndarray, b_c: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    n, m = b_c.shape
    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = a_c
    augmented[:n, n:] = b_c
    phi = expm(augmented * dt)
    return phi[:n, :n], phi[:n, n:]


@dataclass(frozen=True)
class PendulumParameters:
    """Surrogate rotary pendulum; values are catalogue-style numbers, not measurements."""

    motor_resistance: float = 8.4
    torque_constant: float = 0.042
    back_emf_constant: float = 0.042
    arm_mass: float = 0.095
    arm_length: float = 0.085
    arm_damping: float = 0.0015
    pendulum_mass: float = 0.024
    pendulum_length: float = 0.129
    pendulum_damping: float = 0.0005
    gravity: float = 9.81
    volts_per_duty: float = 24.0 / 999.0


def rotary_pendulum_surrogate(
    params: PendulumParameters | None = None, dt: float = 0.002
) -> PlantModel:
    """Upright linearization of a rotary arm pendulum with outputs in encoder counts.

    State is (arm angle, pendulum angle, arm rate, pendulum rate) in radians;
    input is a duty cycle in [-999, 999]. Pendulum counts increase opposite
    to the model's pendulum angle and read 1024 when upright.
    """
    p = params or PendulumParameters()

    j_arm = p.arm_mass * p.arm_length**2 / 3.0
    j_pend = p.pendulum_mass * p.pendulum_length**2 / 3.0
    half_lp = p.pendulum_length / 2.0
    coupling = p.pendulum_mass * half_lp * p.arm_length
    j_total = j_arm * j_pend - coupling**2

    a_c = np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [
                0.0,
                coupling * p.pendulum_mass * half_lp * p.gravity / j_total,
                -j_pend * p.arm_damping / j_total,
                -coupling * p.pendulum_damping / j_total,
            ],
            [
                0.0,
                p.pendulum_mass * half_lp * p.gravity * j_arm / j_total,
                -coupling * p.arm_damping / j_total,
                -j_arm * p.pendulum_damping / j_total,
            ],
        ]
    )
    b_torque = np.array([[0.0], [0.0], [j_pend / j_total], [coupling / j_total]])

    # voltage-driven DC motor: torque = kt (V - km * arm_rate) / Rm
    gain = p.torque_constant / p.motor_resistance
    a_c[:, 2] -= b_torque[:, 0] * gain * p.back_emf_constant
    b_c = b_torque * gain * p.volts_per_duty

    a_d, b_d = discretize(a_c, b_c, dt)
    counts_per_rad = ENCODER_COUNTS_PER_REV / (2.0 * math.pi)
    c_p = np.array([[counts_per_rad, 0.0, 0.0, 0.0], [0.0, -counts_per_rad, 0.0, 0.0]])

    return PlantModel(
        a=a_d,
        b=b_d,
        c=c_p,
        dt=dt,
        output_offset=np.array([0.0, float(ALPHA_UPRIGHT_COUNTS)]),
        encoder_rounding=True,
        output_names=("theta_counts", "alpha_counts"),
        input_names=("u_duty",),
        description="surrogate linear rotary pendulum (not a model of the physical rig)",
    )


def scalar_plant(
    a: float, b: float, dt: float = 0.002, name: str = "y", input_name: str = "u"
) -> PlantModel:
    return PlantModel(
        a=np.array([[a]]),
        b=np.array([[b]]),
        c=np.array([[1.0]]),
        dt=dt,
        output_names=(name,),
        input_names=(input_name,),
        description=f"scalar plant x+ = {a} x + {b} u",
    )
