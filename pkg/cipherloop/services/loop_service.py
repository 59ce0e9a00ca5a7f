"""In-process closed loops and the plant-side endpoint shared with the networked interface."""

import csv
import logging
import secrets
import time
from collections.abc import Iterator, Sequence
from concurrent.futures import Executor, Future, ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cipherloop.config import settings
from cipherloop.core.exceptions import ParameterError
from cipherloop.core.monitoring import LoopMonitor
from cipherloop.models.controller import ControllerSpec, EncState, PlainIntState
from cipherloop.models.enums import AccumulationOrder, LoopMode, SetpointMode
from cipherloop.models.keys import Ciphertext, PrivateKey, PublicKey, RandomizerPower
from cipherloop.models.plant import LoopPreset
from cipherloop.schemas.timing import (
    TIMING_FIELDS,
    LoopSummary,
    TimingRecord,
    TimingSummary,
    TrajectoryRow,
)
from cipherloop.services.controller_service import (
    build_controller_spec,
    decode_outputs,
    decrypt_residues,
    encode_signals,
    encrypt_signals,
    encrypted_generate_control,
    encrypted_update_state,
    initial_enc_state,
    initial_int_state,
    int_reference_step,
    reference_step,
)
from cipherloop.services.paillier_service import (
    EntropySource,
    calc_randomizer,
    sample_randomizer,
)
from cipherloop.services.plant_service import apply_actuator, plant_output, plant_step

logger = logging.getLogger(__name__)


def elapsed_us(start_ns: int) -> float:
    return (time.perf_counter_ns() - start_ns) / 1_000.0


class PlantSide:
    """Everything the trusted endpoint owns: the plant, the private key and plaintext signals."""

    def __init__(
        self,
        preset: LoopPreset,
        spec: ControllerSpec,
        pk: PublicKey | None = None,
        sk: PrivateKey | None = None,
        seed: int | None = None,
        setpoint_mode: SetpointMode = SetpointMode.LOCAL,
    ):
        self.preset = preset
        self.spec = spec
        self.pk = pk
        self.sk = sk
        # the seed only drives sensor noise; randomizers always come from the OS
        self.noise_rng = np.random.default_rng(seed)
        self.entropy: EntropySource = secrets.SystemRandom()
        self.pair_executor: Executor | None = None
        self.setpoint_mode = setpoint_mode

        self.x_p = np.zeros(preset.plant.n_states)
        self.last_u = [0.0] * preset.plant.n_inputs
        self.saturated = 0
        self.setpoint_residues, saturated = encode_signals(spec, preset.setpoint)
        self.saturated += saturated
        self.int_state: PlainIntState = initial_int_state(spec)

    @property
    def randomizers_per_step(self) -> int:
        if self.setpoint_mode is SetpointMode.REMOTE:
            return 2 * self.spec.n_y
        return self.spec.n_y

    def sample(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Plant outputs at step k and their image under the measurement map."""
        noise = None
        if self.preset.noise_std > 0:
            noise = self.noise_rng.normal(0.0, self.preset.noise_std, self.preset.plant.n_outputs)
        y = plant_output(self.preset.plant, self.x_p, k, self.preset.disturbances, noise)
        return y, self.preset.measurement_map @ y

    def encode_measurement(self, z: np.ndarray) -> list[int]:
        residues, saturated = encode_signals(self.spec, [float(v) for v in z])
        self.saturated += saturated
        return residues

    def precompute_randomizers(self) -> list[RandomizerPower]:
        pk = self.require_public_key()
        return [
            calc_randomizer(pk, sample_randomizer(pk, self.entropy), self.pair_executor)
            for _ in range(self.randomizers_per_step)
        ]

    def timed_precompute(self) -> tuple[list[RandomizerPower], float]:
        start = time.perf_counter_ns()
        randomizers = self.precompute_randomizers()
        return randomizers, elapsed_us(start)

    @contextmanager
    def exponentiation_threads(self, paired: bool) -> Iterator[None]:
        """Routes randomizer exponentiations through a two-thread pool while the block runs."""
        if not paired:
            yield
            return
        with ThreadPoolExecutor(max_workers=2, thread_name_prefix="mont-pair") as executor:
            self.pair_executor = executor
            try:
                yield
            finally:
                self.pair_executor = None

    def encrypt_measurement(
        self, residues: Sequence[int], randomizers: Sequence[RandomizerPower]
    ) -> tuple[Ciphertext, ...]:
        return encrypt_signals(self.require_public_key(), residues, randomizers[: self.spec.n_y])

    def encrypt_setpoint(self, randomizers: Sequence[RandomizerPower]) -> tuple[Ciphertext, ...]:
        return encrypt_signals(
            self.require_public_key(), self.setpoint_residues, randomizers[self.spec.n_y :]
        )

    def decrypt_control(self, u_tilde: Sequence[Ciphertext]) -> tuple[int, ...]:
        if self.sk is None:
            raise ParameterError("Decryption needs the private key")
        return decrypt_residues(self.sk, self.require_public_key(), self.spec, u_tilde)

    def reference_check(self, z_residues: Sequence[int], u_hat: Sequence[int]) -> tuple[bool, bool]:
        """Advances the plaintext integer controller; returns (outputs match, overflowed)."""
        step = int_reference_step(self.spec, self.int_state, self.setpoint_residues, z_residues)
        self.int_state = step.state
        return tuple(step.u_hat) == tuple(u_hat), step.overflow

    def actuate(self, u: Sequence[float], k: int) -> list[float]:
        applied = apply_actuator(self.preset.actuator, u)
        self.x_p, _ = plant_step(self.preset.plant, self.x_p, applied, k, self.preset.disturbances)
        self.last_u = applied
        return applied

    def hold(self, k: int) -> list[float]:
        return self.actuate(self.last_u, k)

    def require_public_key(self) -> PublicKey:
        if self.pk is None:
            raise ParameterError("Encryption needs a public key")
        return self.pk


@dataclass
class LoopResult:
    rows: list[TrajectoryRow]
    summary: LoopSummary
    u_hat: list[tuple[int, ...]] = field(default_factory=list)
    metrics: str = ""

    @property
    def control_sequence(self) -> list[tuple[float, ...]]:
        return [tuple(row.inputs) for row in self.rows]


class ClosedLoopRunner:
    def __init__(
        self,
        preset: LoopPreset,
        mode: LoopMode = LoopMode.ENCRYPTED,
        *,
        pk: PublicKey | None = None,
        sk: PrivateKey | None = None,
        seed: int | None = None,
        setpoint_mode: SetpointMode = SetpointMode.LOCAL,
        overlap_randomizer: bool = True,
        order: AccumulationOrder = AccumulationOrder.TREE,
        skip_zero_gains: bool | None = None,
        check_equivalence: bool = True,
        paired_exponentiation: bool | None = None,
    ):
        if mode is LoopMode.ENCRYPTED and (pk is None or sk is None):
            raise ParameterError("Encrypted runs need both keys")

        self.preset = preset
        self.mode = mode
        self.pk = pk
        self.spec = build_controller_spec(preset.design)
        self.plant = PlantSide(preset, self.spec, pk, sk, seed, setpoint_mode)
        self.overlap_randomizer = overlap_randomizer
        self.order = order
        self.skip_zero_gains = settings.SKIP_ZERO_GAINS if skip_zero_gains is None else skip_zero_gains
        self.check_equivalence = check_equivalence
        self.paired_exponentiation = (
            settings.PAIRED_EXPONENTIATION if paired_exponentiation is None else paired_exponentiation
        )
        self.monitor = LoopMonitor("in_process", preset.sample_period_us)

        self._mismatch_step: int | None = None
        self._overflow_steps = 0

    def run(self, steps: int) -> LoopResult:
        if steps < 0:
            raise ParameterError("steps must be non-negative")

        rows: list[TrajectoryRow] = []
        u_hats: list[tuple[int, ...]] = []
        records: list[TimingRecord] = []

        if self.mode is LoopMode.ENCRYPTED:
            u_hats, records, rows = self._run_encrypted(steps)
        elif self.mode is LoopMode.PLAIN_INT:
            u_hats, rows = self._run_plain_int(steps)
        else:
            rows = self._run_real(steps)

        equivalence = "not_checked"
        if self.mode is LoopMode.ENCRYPTED and self.check_equivalence:
            equivalence = "exact" if self._mismatch_step is None else "mismatch"

        stats = self.monitor.stats
        summary = LoopSummary(
            preset=self.preset.name,
            mode=self.mode.value,
            steps=steps,
            key_bits=self.pk.key_bits if self.pk is not None else None,
            equivalence=equivalence,
            first_mismatch_step=self._mismatch_step,
            overflow_steps=self._overflow_steps,
            saturated_signals=self.plant.saturated,
            missed_deadlines=stats.missed,
            held_inputs=stats.held_inputs,
            discarded_frames=stats.discarded_frames,
            worst_total_us=stats.worst_total_us,
            timing=(
                TimingSummary.from_records(
                    self.pk.key_bits, self.pk.word_count, records, self.overlap_randomizer
                )
                if self.pk is not None and records
                else None
            ),
        )
        if equivalence == "mismatch":
            logger.error(
                f"Encrypted loop diverged from the integer controller at step {self._mismatch_step}"
            )
        return LoopResult(
            rows=rows, summary=summary, u_hat=u_hats, metrics=self.monitor.exposition()
        )

    def _row(self, k: int, y: np.ndarray, applied: list[float], timing: TimingRecord) -> TrajectoryRow:
        return TrajectoryRow(
            step=k,
            time_s=k * self.preset.plant.dt,
            outputs=[float(v) for v in y],
            inputs=applied,
            timing=timing,
        )

    def _run_encrypted(
        self, steps: int
    ) -> tuple[list[tuple[int, ...]], list[TimingRecord], list[TrajectoryRow]]:
        plant = self.plant
        with (
            plant.exponentiation_threads(self.paired_exponentiation),
            ThreadPoolExecutor(max_workers=1, thread_name_prefix="randomizer") as background,
        ):
            return self._encrypted_steps(steps, background)

    def _encrypted_steps(
        self, steps: int, background: Executor
    ) -> tuple[list[tuple[int, ...]], list[TimingRecord], list[TrajectoryRow]]:
        plant = self.plant
        pk, spec = plant.require_public_key(), self.spec

        state: EncState = initial_enc_state(spec, pk)
        s_local = encrypt_signals(pk, plant.setpoint_residues, None)
        next_randomizers: list[RandomizerPower] = []
        if self.overlap_randomizer and steps:
            next_randomizers, _ = plant.timed_precompute()

        u_hats: list[tuple[int, ...]] = []
        records: list[TimingRecord] = []
        rows: list[TrajectoryRow] = []

        for k in range(steps):
            y, z = plant.sample(k)
            record = TimingRecord(step=k, randomizer_inline=not self.overlap_randomizer)

            start = time.perf_counter_ns()
            if self.overlap_randomizer:
                randomizers = next_randomizers
            else:
                randomizers, record.randomizer_us = plant.timed_precompute()

            t = time.perf_counter_ns()
            z_residues = plant.encode_measurement(z)
            y_tilde = plant.encrypt_measurement(z_residues, randomizers)
            s_tilde = (
                plant.encrypt_setpoint(randomizers)
                if plant.setpoint_mode is SetpointMode.REMOTE
                else s_local
            )
            record.encrypt_us = elapsed_us(t)

            t = time.perf_counter_ns()
            u_tilde = encrypted_generate_control(
                spec, pk, state, order=self.order, skip_zero_gains=self.skip_zero_gains
            )
            record.control_us = elapsed_us(t)

            t = time.perf_counter_ns()
            u_hat = plant.decrypt_control(u_tilde)
            u = decode_outputs(spec, u_hat, k)
            record.decrypt_us = elapsed_us(t)
            record.total_us = elapsed_us(start)

            applied = plant.actuate(u, k)

            # randomizers for the next sample are computed while the state update runs
            precompute: Future[tuple[list[RandomizerPower], float]] | None = (
                background.submit(plant.timed_precompute)
                if self.overlap_randomizer and k + 1 < steps
                else None
            )

            t = time.perf_counter_ns()
            state = encrypted_update_state(
                spec, pk, state, s_tilde, y_tilde, order=self.order, skip_zero_gains=self.skip_zero_gains
            )
            record.update_us = elapsed_us(t)

            if precompute is not None:
                next_randomizers, record.randomizer_us = precompute.result()

            if self.check_equivalence:
                self._check(k, z_residues, u_hat)

            self.monitor.record_step(k, record.total_us)
            u_hats.append(u_hat)
            records.append(record)
            rows.append(self._row(k, y, applied, record))

        return u_hats, records, rows

    def _run_plain_int(self, steps: int) -> tuple[list[tuple[int, ...]], list[TrajectoryRow]]:
        plant = self.plant
        u_hats: list[tuple[int, ...]] = []
        rows: list[TrajectoryRow] = []

        for k in range(steps):
            y, z = plant.sample(k)
            start = time.perf_counter_ns()
            z_residues = plant.encode_measurement(z)
            step = int_reference_step(self.spec, plant.int_state, plant.setpoint_residues, z_residues)
            plant.int_state = step.state
            u = decode_outputs(self.spec, step.u_hat, k)
            record = TimingRecord(step=k, control_us=elapsed_us(start))
            record.total_us = record.control_us
            if step.overflow:
                self._overflow_steps += 1

            applied = plant.actuate(u, k)
            self.monitor.record_step(k, record.total_us)
            u_hats.append(step.u_hat)
            rows.append(self._row(k, y, applied, record))

        return u_hats, rows

    def _run_real(self, steps: int) -> list[TrajectoryRow]:
        design = self.preset.design
        plant = self.plant
        x = np.zeros(design.n_x)
        s = np.asarray(self.preset.setpoint, dtype=float)
        rows: list[TrajectoryRow] = []

        for k in range(steps):
            y, z = plant.sample(k)
            start = time.perf_counter_ns()
            x, u = reference_step(design, x, s, z, k)
            record = TimingRecord(step=k, control_us=elapsed_us(start))
            record.total_us = record.control_us

            applied = plant.actuate([float(v) for v in u], k)
            self.monitor.record_step(k, record.total_us)
            rows.append(self._row(k, y, applied, record))

        return rows

    def _check(self, k: int, z_residues: Sequence[int], u_hat: Sequence[int]) -> None:
        matches, overflow = self.plant.reference_check(z_residues, u_hat)
        if overflow:
            self._overflow_steps += 1
        if not matches and self._mismatch_step is None:
            self._mismatch_step = k


def run_closed_loop(
    preset: LoopPreset,
    mode: LoopMode = LoopMode.ENCRYPTED,
    *,
    steps: int,
    pk: PublicKey | None = None,
    sk: PrivateKey | None = None,
    seed: int | None = None,
    setpoint_mode: SetpointMode = SetpointMode.LOCAL,
    overlap_randomizer: bool = True,
    order: AccumulationOrder = AccumulationOrder.TREE,
    skip_zero_gains: bool | None = None,
    check_equivalence: bool = True,
    paired_exponentiation: bool | None = None,
) -> LoopResult:
    runner = ClosedLoopRunner(
        preset,
        mode,
        pk=pk,
        sk=sk,
        seed=seed,
        setpoint_mode=setpoint_mode,
        overlap_randomizer=overlap_randomizer,
        order=order,
        skip_zero_gains=skip_zero_gains,
        check_equivalence=check_equivalence,
        paired_exponentiation=paired_exponentiation,
    )
    return runner.run(steps)


def trajectory_columns(preset: LoopPreset) -> list[str]:
    plant = preset.plant
    outputs = list(plant.output_names) or [f"y{i}" for i in range(plant.n_outputs)]
    inputs = list(plant.input_names) or [f"u{i}" for i in range(plant.n_inputs)]
    return ["step", "time_s", *outputs, *inputs, *TIMING_FIELDS]


def write_trajectory_csv(path: str | Path, preset: LoopPreset, rows: Sequence[TrajectoryRow]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(trajectory_columns(preset))
        for row in rows:
            timing = row.timing or TimingRecord(step=row.step)
            writer.writerow(
                [row.step, f"{row.time_s:.6f}", *row.outputs, *row.inputs]
                + [getattr(timing, name) for name in TIMING_FIELDS]
            )
    return target


def write_timing_csv(path: str | Path, summaries: Sequence[TimingSummary]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    columns = list(TimingSummary.model_fields)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for summary in summaries:
            writer.writerow(summary.model_dump())
    return target
