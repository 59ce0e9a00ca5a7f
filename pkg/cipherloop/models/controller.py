from dataclasses import dataclass
from typing import NamedTuple

from cipherloop.models.codec import Fixed
from cipherloop.models.keys import Ciphertext
from cipherloop.schemas.codec import FixedSpec

IntMatrix = tuple[tuple[int, ...], ...]
FixedMatrix = tuple[tuple[Fixed, ...], ...]


@dataclass(frozen=True)
class QuantizedController:
    a_bar: FixedMatrix
    b_bar: FixedMatrix
    c_bar: FixedMatrix
    T: int | None
    saturated_gains: int = 0

    @property
    def n_x(self) -> int:
        return len(self.a_bar)

    @property
    def n_y(self) -> int:
        return len(self.b_bar[0])

    @property
    def n_u(self) -> int:
        return len(self.c_bar)


@dataclass(frozen=True)
class ScalingPlan:
    """Scale exponents (in units of m) of every quantity inside Z_{2^n'}.

    With a finite reset period all state components share the step-indexed
    exponent (k mod T) + 1. Without resets the exponents are fixed per
    component and stored explicitly.
    """

    T: int | None
    signal_exp: int
    state_exps: tuple[int, ...] = ()
    output_exps: tuple[int, ...] = ()
    a_exps: IntMatrix = ()
    b_row_exps: tuple[int, ...] = ()
    c_exps: IntMatrix = ()

    @property
    def is_static(self) -> bool:
        return self.T is None

    def phase(self, k: int) -> int:
        return 0 if self.T is None else k % self.T

    def state_exp(self, k: int, i: int) -> int:
        if self.T is None:
            return self.state_exps[i]
        return self.phase(k) + 1

    def output_exp(self, k: int, i: int) -> int:
        if self.T is None:
            return self.output_exps[i]
        return self.phase(k) + 2

    def a_exp(self, i: int, j: int) -> int:
        return self.a_exps[i][j] if self.T is None else 1

    def b_exp(self, phase: int, i: int) -> int:
        if self.T is None:
            return self.b_row_exps[i]
        return phase + 2 - self.signal_exp

    def c_exp(self, i: int, j: int) -> int:
        return self.c_exps[i][j] if self.T is None else 1

    @property
    def max_exp(self) -> int:
        if self.T is None:
            return max((self.signal_exp, *self.state_exps, *self.output_exps))
        return self.T + 1


@dataclass(frozen=True)
class ControllerSpec:
    name: str
    a_hat: IntMatrix
    b_hat_seq: tuple[IntMatrix, ...]
    c_hat: IntMatrix
    T: int | None
    codec: FixedSpec
    plan: ScalingPlan

    @property
    def n_x(self) -> int:
        return len(self.a_hat)

    @property
    def n_y(self) -> int:
        return len(self.b_hat_seq[0][0])

    @property
    def n_u(self) -> int:
        return len(self.c_hat)

    def b_hat(self, k: int) -> IntMatrix:
        return self.b_hat_seq[self.plan.phase(k)]

    def resets_after(self, k: int) -> bool:
        return self.T is not None and (k + 1) % self.T == 0


@dataclass(frozen=True)
class EncState:
    x_tilde: tuple[Ciphertext, ...]
    k: int = 0


@dataclass(frozen=True)
class PlainIntState:
    x_hat: tuple[int, ...]
    k: int = 0


class IntStep(NamedTuple):
    state: PlainIntState
    u_hat: tuple[int, ...]
    overflow: bool
