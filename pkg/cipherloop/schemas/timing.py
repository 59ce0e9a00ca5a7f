from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

Equivalence = Literal["exact", "mismatch", "not_checked"]


class TimingRecord(BaseModel):
    """Per-step durations in microseconds.

    ``total_us`` covers the critical path: encryption, the outbound frame,
    control generation, the return frame and decryption. Randomizer
    precomputation and the state update are recorded separately and only
    count towards the total when they run inline.
    """

    step: int
    encrypt_us: float = 0.0
    network_out_us: float = 0.0
    control_us: float = 0.0
    network_back_us: float = 0.0
    decrypt_us: float = 0.0
    randomizer_us: float = 0.0
    update_us: float = 0.0
    total_us: float = 0.0
    randomizer_inline: bool = False
    held_input: bool = False

    @property
    def critical_parts_us(self) -> float:
        parts = (
            self.encrypt_us
            + self.network_out_us
            + self.control_us
            + self.network_back_us
            + self.decrypt_us
        )
        if self.randomizer_inline:
            parts += self.randomizer_us
        return parts


TIMING_FIELDS = (
    "encrypt_us",
    "network_out_us",
    "control_us",
    "network_back_us",
    "decrypt_us",
    "randomizer_us",
    "update_us",
    "total_us",
    "held_input",
)


class TimingSummary(BaseModel):
    key_bits: int
    word_count: int
    steps: int
    overlap_randomizer: bool = True
    min_us: float = 0.0
    median_us: float = 0.0
    p99_us: float = 0.0
    max_us: float = 0.0
    median_encrypt_us: float = 0.0
    median_control_us: float = 0.0
    median_decrypt_us: float = 0.0
    median_randomizer_us: float = 0.0
    min_period_us: float = Field(default=0.0, description="Smallest sampling period the p99 step fits into")

    @classmethod
    def from_records(
        cls,
        key_bits: int,
        word_count: int,
        records: Sequence[TimingRecord],
        overlap_randomizer: bool = True,
    ) -> "TimingSummary":
        if not records:
            return cls(
                key_bits=key_bits,
                word_count=word_count,
                steps=0,
                overlap_randomizer=overlap_randomizer,
            )

        totals = np.array([r.total_us for r in records])
        p99 = float(np.percentile(totals, 99))

        def median(name: str) -> float:
            return float(np.median([getattr(r, name) for r in records]))

        return cls(
            key_bits=key_bits,
            word_count=word_count,
            steps=len(records),
            overlap_randomizer=overlap_randomizer,
            min_us=float(totals.min()),
            median_us=float(np.median(totals)),
            p99_us=p99,
            max_us=float(totals.max()),
            median_encrypt_us=median("encrypt_us"),
            median_control_us=median("control_us"),
            median_decrypt_us=median("decrypt_us"),
            median_randomizer_us=median("randomizer_us"),
            min_period_us=p99,
        )

    @property
    def jitter_ratio(self) -> float:
        return self.p99_us / self.median_us if self.median_us else 0.0


class TrajectoryRow(BaseModel):
    step: int
    time_s: float
    outputs: list[float]
    inputs: list[float]
    timing: TimingRecord | None = None


class LoopSummary(BaseModel):
    preset: str
    mode: str
    steps: int
    networked: bool = False
    key_bits: int | None = None
    equivalence: Equivalence = "not_checked"
    first_mismatch_step: int | None = None
    overflow_steps: int = 0
    saturated_signals: int = 0
    missed_deadlines: int = 0
    held_inputs: int = 0
    discarded_frames: int = 0
    worst_total_us: float = 0.0
    timing: TimingSummary | None = None
