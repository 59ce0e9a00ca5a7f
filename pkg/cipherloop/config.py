import logging
from pathlib import Path

from dotenv import dotenv_values
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from cipherloop.core.exceptions import ConfigurationError
from cipherloop.schemas.config import LoopConfig

_LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")


class Settings(BaseSettings):
    APP_NAME: str = "cipherloop"
    VERSION: str = "1.0.0"

    CIPHERLOOP_LOG: str = Field(
        default="WARNING", description="Log level for all cipherloop loggers"
    )
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    DEFAULT_KEY_BITS: int = 256
    DEFAULT_SAMPLE_PERIOD_US: int = 2000

    MILLER_RABIN_ROUNDS: int = Field(default=64, ge=1)
    PRIME_SEARCH_ATTEMPTS: int = Field(
        default=100_000, ge=1, description="Candidates tried per prime before giving up"
    )
    KEYGEN_ATTEMPTS: int = Field(default=64, ge=1)

    SKIP_ZERO_GAINS: bool = Field(
        default=False,
        description="Skip homomorphic products with public zero gains",
    )
    PAIRED_EXPONENTIATION: bool = Field(
        default=False,
        description="Run the square and accumulate of each randomizer exponentiation step on two threads",
    )

    NETWORK_TIMEOUT_FACTOR: float = Field(
        default=1.0, gt=0, description="Control reply timeout in sample periods"
    )
    CONNECT_RETRIES: int = 40
    CONNECT_RETRY_DELAY_S: float = 0.05
    MAX_FRAME_PAYLOAD: int = 1 << 20

    BENCH_WARMUP_STEPS: int = 5

    model_config = SettingsConfigDict(
        env_file=".env", case_sensitive=True, env_file_encoding="utf-8", extra="ignore"
    )

    @field_validator("CIPHERLOOP_LOG")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in _LOG_LEVELS:
            raise ValueError(
                f"Invalid CIPHERLOOP_LOG level: {v}. Use one of {', '.join(_LOG_LEVELS)}"
            )
        return level

    @property
    def log_level(self) -> int:
        return logging.getLevelName(self.CIPHERLOOP_LOG)


settings = Settings()


def load_loop_config(path: str | Path) -> LoopConfig:
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"Loop configuration file not found: {config_path}")

    values = {
        key.strip(): value
        for key, value in dotenv_values(config_path).items()
        if value is not None and value != ""
    }
    try:
        return LoopConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid loop configuration {config_path}: {e}") from e
