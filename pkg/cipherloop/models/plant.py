from dataclasses import dataclass, field

import numpy as np

from cipherloop.models.enums import DisturbanceKind, DisturbanceTarget
from cipherloop.schemas.controller import ControllerDesign


@dataclass(frozen=True)
class Disturbance:
    step: int
    channel: int
    magnitude: float
    kind: DisturbanceKind = DisturbanceKind.IMPULSE
    target: DisturbanceTarget = DisturbanceTarget.OUTPUT

    def contribution(self, k: int) -> float:
        if self.kind is DisturbanceKind.IMPULSE:
            return self.magnitude if k == self.step else 0.0
        return self.magnitude if k >= self.step else 0.0


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Discrete-time plant x+ = A_p x + B_p u, y = C_p x + offset."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    dt: float
    output_offset: np.ndarray | None = None
    encoder_rounding: bool = False
    output_names: tuple[str, ...] = ()
    input_names: tuple[str, ...] = ()
    description: str = ""

    def __post_init__(self):
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ValueError("A_p must be square")
        if self.b.ndim != 2 or self.b.shape[0] != n:
            raise ValueError(f"B_p must have {n} rows")
        if self.c.ndim != 2 or self.c.shape[1] != n:
            raise ValueError(f"C_p must have {n} columns")
        if self.dt <= 0:
            raise ValueError("Sample period must be positive")
        if self.output_offset is not None and self.output_offset.shape != (self.c.shape[0],):
            raise ValueError("Output offset must match the number of outputs")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class Actuator:
    lo: float
    hi: float
    integer: bool = False


@dataclass(frozen=True, eq=False)
class LoopPreset:
    name: str
    design: ControllerDesign
    plant: PlantModel
    measurement_map: np.ndarray
    setpoint: tuple[float, ...]
    actuator: Actuator
    disturbances: tuple[Disturbance, ...] = ()
    noise_std: float = 0.0
    default_key_bits: int = 256
    sample_period_us: int = 2000
    notes: dict[str, str] = field(default_factory=dict)
