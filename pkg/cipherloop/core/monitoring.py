import logging
from dataclasses import dataclass, field

from prometheus_client import CollectorRegistry, Counter, Histogram, generate_latest
from prometheus_client.utils import floatToGoString

from cipherloop.core.logging import LoopLogger

logger = logging.getLogger(__name__)

_LATENCY_BUCKETS_US = (
    100.0, 250.0, 500.0, 1_000.0, 2_000.0, 5_000.0,
    10_000.0, 20_000.0, 50_000.0, 100_000.0, 250_000.0, 1_000_000.0,
)


@dataclass
class DeadlineStats:
    steps: int = 0
    missed: int = 0
    held_inputs: int = 0
    discarded_frames: int = 0
    worst_total_us: float = 0.0
    missed_steps: list[int] = field(default_factory=list)


class LoopMonitor:
    """Counts steps, missed deadlines and discarded frames of one loop session.

    The per-session registry is the source of every reported count.
    """

    def __init__(self, role: str, sample_period_us: int):
        self.role = role
        self.sample_period_us = sample_period_us
        self.registry = CollectorRegistry()

        self._worst_total_us = 0.0
        self._missed_steps: list[int] = []

        labels = ["role"]
        self._steps = Counter(
            "cipherloop_steps", "Control steps executed", labels, registry=self.registry
        ).labels(role=role)
        self._missed = Counter(
            "cipherloop_deadline_misses",
            "Steps whose latency exceeded the sample period",
            labels,
            registry=self.registry,
        ).labels(role=role)
        self._held = Counter(
            "cipherloop_held_inputs",
            "Steps that re-applied the previous input",
            labels,
            registry=self.registry,
        ).labels(role=role)
        self._discarded = Counter(
            "cipherloop_discarded_frames",
            "Frames dropped as stale or out of order",
            labels,
            registry=self.registry,
        ).labels(role=role)
        self._latency = Histogram(
            "cipherloop_step_latency_us",
            "Critical-path latency per step in microseconds",
            labels,
            buckets=_LATENCY_BUCKETS_US,
            registry=self.registry,
        ).labels(role=role)

    def _sample(self, name: str) -> float:
        value = self.registry.get_sample_value(name, {"role": self.role})
        return value or 0.0

    def record_step(self, step: int, total_us: float, held_input: bool = False) -> bool:
        self._steps.inc()
        self._latency.observe(total_us)
        self._worst_total_us = max(self._worst_total_us, total_us)

        if held_input:
            self._held.inc()

        missed = held_input or total_us > self.sample_period_us
        if missed:
            self._missed.inc()
            self._missed_steps.append(step)
            LoopLogger.log_deadline_miss(step, total_us, self.sample_period_us, held_input)
        return missed

    def record_discard(self, msg_type: str, seq: int, expected: int) -> None:
        self._discarded.inc()
        LoopLogger.log_frame_discarded(self.role, msg_type, seq, expected)

    @property
    def stats(self) -> DeadlineStats:
        return DeadlineStats(
            steps=int(self._sample("cipherloop_steps_total")),
            missed=int(self._sample("cipherloop_deadline_misses_total")),
            held_inputs=int(self._sample("cipherloop_held_inputs_total")),
            discarded_frames=int(self._sample("cipherloop_discarded_frames_total")),
            worst_total_us=self._worst_total_us,
            missed_steps=list(self._missed_steps),
        )

    def latency_le(self, bound_us: float) -> int | None:
        """Steps with latency at or below bound_us; None unless bound_us is a bucket edge."""
        if float(bound_us) not in _LATENCY_BUCKETS_US:
            return None
        return int(
            self.registry.get_sample_value(
                "cipherloop_step_latency_us_bucket", {"role": self.role, "le": floatToGoString(bound_us)}
            )
            or 0
        )

    def snapshot(self) -> dict[str, object]:
        stats = self.stats
        return {
            "role": self.role,
            "steps": stats.steps,
            "missed_deadlines": stats.missed,
            "held_inputs": stats.held_inputs,
            "discarded_frames": stats.discarded_frames,
            "within_period": self.latency_le(self.sample_period_us),
            "latency_sum_us": round(self._sample("cipherloop_step_latency_us_sum"), 1),
            "worst_total_us": round(stats.worst_total_us, 1),
            "sample_period_us": self.sample_period_us,
        }

    def exposition(self) -> str:
        return generate_latest(self.registry).decode("utf-8")
