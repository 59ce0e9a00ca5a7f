import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cipherloop.models.controller import ControllerSpec, ScalingPlan
from cipherloop.schemas.codec import FixedSpec
from cipherloop.services.codec_service import derive_n_prime


class ControllerDesign(BaseModel):
    """Real-valued resetting controller x+ = A x + B (s - y), u = C x.

    ``T=None`` means the state is never reset. ``signal_exp`` is the scale
    exponent of setpoints and measurements inside the integer ring: 1 for
    real-valued signals, 0 for sensors that already deliver integers.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    A: list[list[float]]
    B: list[list[float]]
    C: list[list[float]]
    T: int | None = Field(default=None, ge=1)
    n: int = Field(ge=1)
    m: int = Field(ge=0)
    n_prime: int | None = Field(default=None, ge=1)
    signal_exp: int = Field(default=1, ge=0, le=1)

    @model_validator(mode="after")
    def check_dimensions(self) -> "ControllerDesign":
        n_x = len(self.A)
        if n_x == 0 or any(len(row) != n_x for row in self.A):
            raise ValueError("A must be a non-empty square matrix")
        if len(self.B) != n_x or not self.B[0] or any(len(row) != len(self.B[0]) for row in self.B):
            raise ValueError(f"B must have {n_x} rows of equal, non-zero length")
        if not self.C or any(len(row) != n_x for row in self.C):
            raise ValueError(f"C must have rows of length {n_x}")
        return self

    @property
    def n_x(self) -> int:
        return len(self.A)

    @property
    def n_y(self) -> int:
        return len(self.B[0])

    @property
    def n_u(self) -> int:
        return len(self.C)

    @property
    def resolved_n_prime(self) -> int:
        return derive_n_prime(self.n_x, self.n_u, self.T, self.n, self.n_prime)

    @property
    def codec(self) -> FixedSpec:
        return FixedSpec(n=self.n, m=self.m, n_prime=self.resolved_n_prime)

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.A, dtype=float),
            np.asarray(self.B, dtype=float),
            np.asarray(self.C, dtype=float),
        )


class PublicControllerParams(BaseModel):
    """Integer gains and scale plan as exported for the controller host.

    Everything here is public: residues in Z_{2^n'} and scale exponents.
    """

    name: str
    n: int
    m: int
    n_prime: int
    T: int | None = None
    signal_exp: int
    a_hat: list[list[int]]
    b_hat_seq: list[list[list[int]]]
    c_hat: list[list[int]]
    state_exps: list[int] = []
    output_exps: list[int] = []
    a_exps: list[list[int]] = []
    b_row_exps: list[int] = []
    c_exps: list[list[int]] = []
    setpoint_residues: list[int] | None = None

    @classmethod
    def from_spec(
        cls, spec: ControllerSpec, setpoint_residues: list[int] | None = None
    ) -> "PublicControllerParams":
        plan = spec.plan
        return cls(
            name=spec.name,
            n=spec.codec.n,
            m=spec.codec.m,
            n_prime=spec.codec.n_prime,
            T=spec.T,
            signal_exp=plan.signal_exp,
            a_hat=[list(row) for row in spec.a_hat],
            b_hat_seq=[[list(row) for row in b] for b in spec.b_hat_seq],
            c_hat=[list(row) for row in spec.c_hat],
            state_exps=list(plan.state_exps),
            output_exps=list(plan.output_exps),
            a_exps=[list(row) for row in plan.a_exps],
            b_row_exps=list(plan.b_row_exps),
            c_exps=[list(row) for row in plan.c_exps],
            setpoint_residues=setpoint_residues,
        )

    def to_spec(self) -> ControllerSpec:
        plan = ScalingPlan(
            T=self.T,
            signal_exp=self.signal_exp,
            state_exps=tuple(self.state_exps),
            output_exps=tuple(self.output_exps),
            a_exps=tuple(tuple(row) for row in self.a_exps),
            b_row_exps=tuple(self.b_row_exps),
            c_exps=tuple(tuple(row) for row in self.c_exps),
        )
        return ControllerSpec(
            name=self.name,
            a_hat=tuple(tuple(row) for row in self.a_hat),
            b_hat_seq=tuple(tuple(tuple(row) for row in b) for b in self.b_hat_seq),
            c_hat=tuple(tuple(row) for row in self.c_hat),
            T=self.T,
            codec=FixedSpec(n=self.n, m=self.m, n_prime=self.n_prime),
            plan=plan,
        )
