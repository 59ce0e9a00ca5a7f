from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from cipherloop.models.enums import DeadlinePolicy, Preset, SetpointMode

ResetPeriod = int | Literal["inf"]


def parse_address(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"Address must look like host:port, got {value!r}")
    port_number = int(port)
    if not 0 <= port_number <= 65535:
        raise ValueError(f"Port out of range in {value!r}")
    return host, port_number


class LoopConfig(BaseModel):
    """Contents of a loop configuration file.

    Unset codec fields fall back to the preset's own values.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    key_bits: int = 256
    preset: Preset = Preset.QUBE
    n_prime: int | None = Field(default=None, ge=1)
    n: int | None = Field(default=None, ge=1)
    m: int | None = Field(default=None, ge=0)
    T: ResetPeriod | None = None
    sample_period_us: int = Field(default=2000, gt=0)
    listen_addr: str = "127.0.0.1:50515"
    peer_addr: str = "127.0.0.1:50515"
    log_path: str | None = None
    seed: int | None = None
    noise_std: float = Field(default=0.0, ge=0, description="Sensor noise std in output units, drawn from seed")
    steps: int = Field(default=1000, ge=0)
    setpoint_mode: SetpointMode = SetpointMode.LOCAL
    deadline_policy: DeadlinePolicy = DeadlinePolicy.HOLD

    @field_validator("T", mode="before")
    @classmethod
    def parse_reset_period(cls, v: object) -> object:
        if isinstance(v, str):
            text = v.strip().lower()
            if text in ("inf", "infinity", "∞"):
                return "inf"
            if text.isdigit():
                return int(text)
        return v

    @field_validator("T")
    @classmethod
    def validate_reset_period(cls, v: ResetPeriod | None) -> ResetPeriod | None:
        if isinstance(v, int) and v < 1:
            raise ValueError("T must be at least 1 or 'inf'")
        return v

    @field_validator("listen_addr", "peer_addr")
    @classmethod
    def validate_address(cls, v: str) -> str:
        _ = parse_address(v)
        return v

    @property
    def listen_address(self) -> tuple[str, int]:
        return parse_address(self.listen_addr)

    @property
    def peer_address(self) -> tuple[str, int]:
        return parse_address(self.peer_addr)
