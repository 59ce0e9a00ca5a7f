from pydantic import BaseModel, ConfigDict, Field

from cipherloop.models.controller import ControllerSpec
from cipherloop.models.enums import SetpointMode
from cipherloop.models.keys import PublicKey


class SessionParams(BaseModel):
    """Parameters both endpoints must agree on; exchanged in the Hello frame."""

    model_config = ConfigDict(frozen=True)

    preset: str
    key_bits: int = Field(ge=1)
    word_count: int = Field(ge=1, description="16-bit words w shared by all Montgomery contexts")
    key_fingerprint: str
    n_prime: int = Field(ge=1)
    m: int = Field(ge=0)
    n_x: int = Field(ge=1)
    n_y: int = Field(ge=1)
    n_u: int = Field(ge=1)
    T: int | None = Field(default=None, ge=1, description="Reset period; None means never")
    sample_period_us: int = Field(gt=0)
    setpoint_mode: SetpointMode = SetpointMode.LOCAL

    @classmethod
    def for_session(
        cls,
        spec: ControllerSpec,
        pk: PublicKey,
        sample_period_us: int,
        setpoint_mode: SetpointMode = SetpointMode.LOCAL,
    ) -> "SessionParams":
        return cls(
            preset=spec.name,
            key_bits=pk.key_bits,
            word_count=pk.word_count,
            key_fingerprint=pk.fingerprint,
            n_prime=spec.codec.n_prime,
            m=spec.codec.m,
            n_x=spec.n_x,
            n_y=spec.n_y,
            n_u=spec.n_u,
            T=spec.T,
            sample_period_us=sample_period_us,
            setpoint_mode=setpoint_mode,
        )

    def mismatches(self, other: "SessionParams") -> list[str]:
        mine = self.model_dump()
        theirs = other.model_dump()
        return [
            f"{name}: {mine[name]!r} != {theirs[name]!r}"
            for name in mine
            if mine[name] != theirs[name]
        ]
