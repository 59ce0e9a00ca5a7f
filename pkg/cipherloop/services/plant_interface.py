"""Plant interface host: samples the plant, encrypts outputs, decrypts control inputs."""

import asyncio
import logging
import time
from contextlib import suppress

from cipherloop.api.wire import (
    WireMessage,
    batch_message,
    hello_message,
    parse_hello,
    read_frame,
    shutdown_message,
    shutdown_reason,
    unpack_ciphertexts,
    write_frame,
)
from cipherloop.config import settings
from cipherloop.core.exceptions import SessionRefusedError, WireProtocolError
from cipherloop.core.logging import LoopLogger
from cipherloop.core.monitoring import LoopMonitor
from cipherloop.models.enums import DeadlinePolicy, LoopMode, MessageType, SetpointMode
from cipherloop.models.keys import PrivateKey, PublicKey, RandomizerPower
from cipherloop.models.plant import LoopPreset
from cipherloop.schemas.timing import LoopSummary, TimingRecord, TimingSummary, TrajectoryRow
from cipherloop.schemas.wire import SessionParams
from cipherloop.services.controller_service import build_controller_spec, decode_outputs
from cipherloop.services.loop_service import LoopResult, PlantSide, elapsed_us

logger = logging.getLogger(__name__)

HANDSHAKE_TIMEOUT_S = 10.0


class PlantInterfaceService:
    def __init__(
        self,
        preset: LoopPreset,
        pk: PublicKey,
        sk: PrivateKey,
        *,
        seed: int | None = None,
        setpoint_mode: SetpointMode = SetpointMode.LOCAL,
        deadline_policy: DeadlinePolicy = DeadlinePolicy.HOLD,
        overlap_randomizer: bool = True,
        timeout_factor: float | None = None,
        check_equivalence: bool = True,
        paired_exponentiation: bool | None = None,
    ):
        self.preset = preset
        self.pk = pk
        self.spec = build_controller_spec(preset.design)
        self.plant = PlantSide(preset, self.spec, pk, sk, seed, setpoint_mode)
        self.params = SessionParams.for_session(
            self.spec, pk, preset.sample_period_us, setpoint_mode
        )
        self.deadline_policy = deadline_policy
        self.overlap_randomizer = overlap_randomizer
        self.timeout_factor = timeout_factor or settings.NETWORK_TIMEOUT_FACTOR
        self.check_equivalence = check_equivalence
        self.paired_exponentiation = (
            settings.PAIRED_EXPONENTIATION if paired_exponentiation is None else paired_exponentiation
        )
        self.monitor = LoopMonitor("plant", preset.sample_period_us)

        self._inbox: asyncio.Queue[WireMessage | None] = asyncio.Queue()
        self._reader_error: Exception | None = None
        self._mismatch_step: int | None = None
        self._overflow_steps = 0

    @property
    def reply_timeout_s(self) -> float | None:
        if self.deadline_policy is DeadlinePolicy.WAIT:
            return None
        return self.preset.sample_period_us * self.timeout_factor / 1e6

    async def _connect(self, host: str, port: int) -> tuple[asyncio.StreamReader, asyncio.StreamWriter]:
        last_error: OSError | None = None
        for attempt in range(settings.CONNECT_RETRIES):
            try:
                return await asyncio.open_connection(host, port)
            except OSError as e:
                last_error = e
                logger.debug(f"Connect attempt {attempt + 1} to {host}:{port} failed: {e}")
                await asyncio.sleep(settings.CONNECT_RETRY_DELAY_S)
        raise ConnectionError(f"Controller at {host}:{port} unreachable: {last_error}")

    async def _handshake(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, peer: str
    ) -> None:
        await write_frame(writer, hello_message(self.params))
        reply = await asyncio.wait_for(read_frame(reader), HANDSHAKE_TIMEOUT_S)

        if reply.msg_type is MessageType.SHUTDOWN:
            reason = shutdown_reason(reply)
            LoopLogger.log_session_refused("plant", peer, reason)
            raise SessionRefusedError(f"Controller refused the session: {reason}")

        mismatches = self.params.mismatches(parse_hello(reply))
        if mismatches:
            reason = "; ".join(mismatches)
            LoopLogger.log_session_refused("plant", peer, reason)
            raise SessionRefusedError(f"Controller parameters differ: {reason}")

        LoopLogger.log_session_started("plant", peer, self.params.model_dump(mode="json"))

    async def _reader_loop(self, reader: asyncio.StreamReader) -> None:
        try:
            while True:
                await self._inbox.put(await read_frame(reader))
        except (WireProtocolError, ConnectionError) as e:
            self._reader_error = e
            await self._inbox.put(None)

    async def _await_control(self, k: int) -> WireMessage | None:
        """Next ControlBatch for step k, or None once the reply deadline passes."""
        loop = asyncio.get_running_loop()
        timeout = self.reply_timeout_s
        deadline = None if timeout is None else loop.time() + timeout

        while True:
            remaining = None if deadline is None else deadline - loop.time()
            if remaining is not None and remaining <= 0:
                return None
            try:
                msg = await asyncio.wait_for(self._inbox.get(), remaining)
            except asyncio.TimeoutError:
                return None

            if msg is None:
                raise WireProtocolError(f"Controller connection lost: {self._reader_error}")
            if msg.msg_type is MessageType.SHUTDOWN:
                raise SessionRefusedError(f"Controller ended the session: {shutdown_reason(msg)}")
            if msg.msg_type is not MessageType.CONTROL_BATCH:
                raise WireProtocolError(f"Unexpected {msg.msg_type.name} frame from the controller")
            if msg.seq == k:
                return msg
            self.monitor.record_discard(msg.msg_type.name, msg.seq, k)

    async def run(self, host: str, port: int, steps: int) -> LoopResult:
        reader, writer = await self._connect(host, port)
        peer = f"{host}:{port}"
        reader_task: asyncio.Task[None] | None = None
        try:
            await self._handshake(reader, writer, peer)
            reader_task = asyncio.create_task(self._reader_loop(reader))
            with self.plant.exponentiation_threads(self.paired_exponentiation):
                result = await self._loop(writer, steps)
            await write_frame(writer, shutdown_message(steps, "done"))
        finally:
            if reader_task is not None:
                _ = reader_task.cancel()
                _ = await asyncio.gather(reader_task, return_exceptions=True)
            writer.close()
            with suppress(ConnectionError):
                await writer.wait_closed()

        LoopLogger.log_session_finished("plant", steps, self.monitor.snapshot())
        return result

    async def _loop(self, writer: asyncio.StreamWriter, steps: int) -> LoopResult:
        plant, spec, pk = self.plant, self.spec, self.pk
        remote_setpoint = plant.setpoint_mode is SetpointMode.REMOTE

        rows: list[TrajectoryRow] = []
        records: list[TimingRecord] = []
        u_hats: list[tuple[int, ...]] = []

        next_randomizers: list[RandomizerPower] = []
        if self.overlap_randomizer and steps:
            next_randomizers, _ = await asyncio.to_thread(plant.timed_precompute)

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
            s_tilde = plant.encrypt_setpoint(randomizers) if remote_setpoint else ()
            record.encrypt_us = elapsed_us(t)

            t = time.perf_counter_ns()
            if remote_setpoint:
                await write_frame(writer, batch_message(MessageType.SETPOINT_BATCH, k, pk, s_tilde))
            await write_frame(writer, batch_message(MessageType.MEASUREMENT_BATCH, k, pk, y_tilde))
            record.network_out_us = elapsed_us(t)

            # randomizers for the next sample are computed while the controller works
            precompute = (
                asyncio.create_task(asyncio.to_thread(plant.timed_precompute))
                if self.overlap_randomizer and k + 1 < steps
                else None
            )

            t = time.perf_counter_ns()
            reply = await self._await_control(k)
            record.control_us = elapsed_us(t)

            u_hat: tuple[int, ...] | None = None
            if reply is not None:
                t = time.perf_counter_ns()
                u_tilde = unpack_ciphertexts(pk, reply.payload, spec.n_u)
                record.network_back_us = elapsed_us(t)

                t = time.perf_counter_ns()
                u_hat = plant.decrypt_control(u_tilde)
                u = decode_outputs(spec, u_hat, k)
                record.decrypt_us = elapsed_us(t)
                record.total_us = elapsed_us(start)
                applied = plant.actuate(u, k)
            else:
                record.total_us = elapsed_us(start)
                record.held_input = True
                applied = plant.hold(k)

            if precompute is not None:
                next_randomizers, record.randomizer_us = await precompute

            if self.check_equivalence:
                matches, overflow = plant.reference_check(z_residues, u_hat or ())
                if overflow:
                    self._overflow_steps += 1
                if u_hat is not None and not matches and self._mismatch_step is None:
                    self._mismatch_step = k

            self.monitor.record_step(k, record.total_us, held_input=record.held_input)
            if u_hat is not None:
                u_hats.append(u_hat)
            records.append(record)
            rows.append(
                TrajectoryRow(
                    step=k,
                    time_s=k * self.preset.plant.dt,
                    outputs=[float(v) for v in y],
                    inputs=applied,
                    timing=record,
                )
            )

        return LoopResult(
            rows=rows,
            summary=self._summary(steps, records),
            u_hat=u_hats,
            metrics=self.monitor.exposition(),
        )

    def _summary(self, steps: int, records: list[TimingRecord]) -> LoopSummary:
        equivalence = "not_checked"
        if self.check_equivalence:
            equivalence = "exact" if self._mismatch_step is None else "mismatch"
        stats = self.monitor.stats
        answered = [r for r in records if not r.held_input]
        return LoopSummary(
            preset=self.preset.name,
            mode=LoopMode.ENCRYPTED.value,
            steps=steps,
            networked=True,
            key_bits=self.pk.key_bits,
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
                    self.pk.key_bits, self.pk.word_count, answered, self.overlap_randomizer
                )
                if answered
                else None
            ),
        )
