from pydantic import BaseModel, ConfigDict, Field, model_validator


class FixedSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1, description="Total bits of the fixed-point format")
    m: int = Field(ge=0, description="Fractional bits")
    n_prime: int = Field(ge=1, description="Width of the integer ring Z_{2^n'}")

    @model_validator(mode="after")
    def check_ordering(self) -> "FixedSpec":
        if not self.m < self.n <= self.n_prime:
            raise ValueError(
                f"Fixed-point format requires 0 <= m < n <= n', got m={self.m}, n={self.n}, n'={self.n_prime}"
            )
        return self

    @property
    def modulus(self) -> int:
        return 1 << self.n_prime

    @property
    def grid_min(self) -> int:
        return -(1 << (self.n - 1))

    @property
    def grid_max(self) -> int:
        return (1 << (self.n - 1)) - 1
