"""Controller host. It holds the public key and public integer gains, nothing else."""

import asyncio
import logging
import time
from collections.abc import Iterable, Sequence
from contextlib import suppress

from cipherloop.api.wire import (
    batch_message,
    hello_message,
    parse_hello,
    read_frame,
    shutdown_message,
    unpack_ciphertexts,
    write_frame,
)
from cipherloop.config import settings
from cipherloop.core.exceptions import ParameterError, WireProtocolError
from cipherloop.core.logging import LoopLogger
from cipherloop.core.monitoring import LoopMonitor
from cipherloop.models.controller import ControllerSpec
from cipherloop.models.enums import AccumulationOrder, MessageType, SetpointMode
from cipherloop.models.keys import Ciphertext, PublicKey
from cipherloop.schemas.wire import SessionParams
from cipherloop.services.controller_service import (
    encrypt_signals,
    encrypted_generate_control,
    encrypted_update_state,
    initial_enc_state,
)

logger = logging.getLogger(__name__)


class ControllerEndpoint:
    running: bool
    sessions_served: int

    def __init__(
        self,
        spec: ControllerSpec,
        pk: PublicKey,
        params: SessionParams,
        *,
        setpoint_residues: Sequence[int] | None = None,
        order: AccumulationOrder = AccumulationOrder.TREE,
        skip_zero_gains: bool | None = None,
        drop_steps: Iterable[int] = (),
    ):
        if params.setpoint_mode is SetpointMode.LOCAL and setpoint_residues is None:
            raise ParameterError("Local setpoint mode needs the encoded setpoint")

        self.spec = spec
        self.pk = pk
        self.params = params
        self.setpoint_residues = tuple(setpoint_residues) if setpoint_residues is not None else None
        self.order = order
        self.skip_zero_gains = settings.SKIP_ZERO_GAINS if skip_zero_gains is None else skip_zero_gains
        # fault injection: ControlBatch frames for these steps are computed but never sent
        self.drop_steps = frozenset(drop_steps)
        self.monitor = LoopMonitor("controller", params.sample_period_us)

        self.running = False
        self.sessions_served = 0
        self._server: asyncio.Server | None = None
        self._session_limit: int | None = None
        self._finished = asyncio.Event()

    async def start(self, host: str, port: int, sessions: int | None = None) -> tuple[str, int]:
        """Starts listening; returns the bound address (port 0 picks a free one)."""
        if self.running:
            raise ParameterError("Controller endpoint already running")

        self._session_limit = sessions
        self._finished.clear()
        self._server = await asyncio.start_server(self.handle_session, host, port)
        self.running = True

        bound = self._server.sockets[0].getsockname()
        logger.info(f"Controller listening on {bound[0]}:{bound[1]}")
        return bound[0], bound[1]

    async def wait_finished(self) -> None:
        await self._finished.wait()

    async def stop(self) -> None:
        if not self.running or self._server is None:
            return
        self.running = False
        self._server.close()
        await self._server.wait_closed()
        self._server = None
        logger.info(f"Controller stopped after {self.sessions_served} sessions")

    async def serve(self, host: str, port: int, sessions: int | None = None) -> None:
        await self.start(host, port, sessions)
        try:
            await self.wait_finished()
        finally:
            await self.stop()

    async def handle_session(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        peer = str(writer.get_extra_info("peername"))
        try:
            await self._run_session(reader, writer, peer)
        except WireProtocolError as e:
            logger.error(f"Session with {peer} aborted: {e}")
        except ConnectionError as e:
            logger.error(f"Connection to {peer} lost: {e}")
        finally:
            writer.close()
            with suppress(ConnectionError):
                await writer.wait_closed()
            self.sessions_served += 1
            if self._session_limit is not None and self.sessions_served >= self._session_limit:
                self._finished.set()

    async def _run_session(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, peer: str
    ) -> None:
        offered = parse_hello(await read_frame(reader))
        mismatches = self.params.mismatches(offered)
        if mismatches:
            reason = "; ".join(mismatches)
            LoopLogger.log_session_refused("controller", peer, reason)
            await write_frame(writer, shutdown_message(0, reason))
            return

        await write_frame(writer, hello_message(self.params))
        LoopLogger.log_session_started("controller", peer, self.params.model_dump(mode="json"))

        spec, pk = self.spec, self.pk
        state = initial_enc_state(spec, pk)
        s_tilde: tuple[Ciphertext, ...] | None = None
        if self.setpoint_residues is not None and self.params.setpoint_mode is SetpointMode.LOCAL:
            s_tilde = encrypt_signals(pk, self.setpoint_residues, None)

        expected = 0
        while True:
            msg = await read_frame(reader)
            if msg.msg_type is MessageType.SHUTDOWN:
                break
            if msg.seq != expected:
                self.monitor.record_discard(msg.msg_type.name, msg.seq, expected)
                continue

            if msg.msg_type is MessageType.SETPOINT_BATCH:
                s_tilde = unpack_ciphertexts(pk, msg.payload, spec.n_y)
                continue
            if msg.msg_type is not MessageType.MEASUREMENT_BATCH:
                raise WireProtocolError(f"Unexpected {msg.msg_type.name} frame at step {msg.seq}")
            if s_tilde is None:
                raise WireProtocolError(f"Measurement for step {msg.seq} arrived before any setpoint")

            start = time.perf_counter()
            y_tilde = unpack_ciphertexts(pk, msg.payload, spec.n_y)
            u_tilde = await asyncio.to_thread(
                encrypted_generate_control,
                spec,
                pk,
                state,
                order=self.order,
                skip_zero_gains=self.skip_zero_gains,
            )
            if msg.seq in self.drop_steps:
                logger.info(f"Dropping ControlBatch for step {msg.seq}")
            else:
                await write_frame(
                    writer, batch_message(MessageType.CONTROL_BATCH, msg.seq, pk, u_tilde)
                )
            reply_us = (time.perf_counter() - start) * 1e6

            state = await asyncio.to_thread(
                encrypted_update_state,
                spec,
                pk,
                state,
                s_tilde,
                y_tilde,
                order=self.order,
                skip_zero_gains=self.skip_zero_gains,
            )
            self.monitor.record_step(msg.seq, reply_us)
            expected += 1

        LoopLogger.log_session_finished("controller", expected, self.monitor.snapshot())
