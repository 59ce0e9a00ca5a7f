"""Binary framing between the plant interface and the controller.

Every frame is a 13-byte big-endian header (type, sequence number, payload
length) followed by the payload. Ciphertext batches are concatenations of
fixed-width residues; Hello carries SessionParams as JSON and Shutdown a
UTF-8 reason.
"""

import asyncio
import logging
import struct
from collections.abc import Sequence
from dataclasses import dataclass

from pydantic import ValidationError

from cipherloop.config import settings
from cipherloop.core.exceptions import ParameterError, WireProtocolError
from cipherloop.core.mont_arith import from_bytes, to_bytes
from cipherloop.models.enums import MessageType
from cipherloop.models.keys import Ciphertext, PublicKey
from cipherloop.schemas.wire import SessionParams

logger = logging.getLogger(__name__)

HEADER = struct.Struct(">BQI")
MAX_SEQ = (1 << 64) - 1


@dataclass(frozen=True)
class WireMessage:
    msg_type: MessageType
    seq: int
    payload: bytes = b""

    @property
    def payload_len(self) -> int:
        return len(self.payload)


def encode_frame(msg: WireMessage) -> bytes:
    if not 0 <= msg.seq <= MAX_SEQ:
        raise WireProtocolError(f"Sequence number {msg.seq} does not fit in 64 bits")
    if msg.payload_len > settings.MAX_FRAME_PAYLOAD:
        raise WireProtocolError(f"Payload of {msg.payload_len} bytes exceeds the frame limit")
    return HEADER.pack(int(msg.msg_type), msg.seq, msg.payload_len) + msg.payload


def _parse_header(header: bytes) -> tuple[MessageType, int, int]:
    raw_type, seq, length = HEADER.unpack(header)
    try:
        msg_type = MessageType(raw_type)
    except ValueError as e:
        raise WireProtocolError(f"Unknown message type 0x{raw_type:02x}") from e
    if length > settings.MAX_FRAME_PAYLOAD:
        raise WireProtocolError(f"Announced payload of {length} bytes exceeds the frame limit")
    return msg_type, seq, length


def decode_frame(data: bytes) -> WireMessage:
    if len(data) < HEADER.size:
        raise WireProtocolError(f"Frame shorter than the {HEADER.size}-byte header")
    msg_type, seq, length = _parse_header(data[: HEADER.size])
    payload = data[HEADER.size :]
    if len(payload) != length:
        raise WireProtocolError(f"Header announces {length} payload bytes, got {len(payload)}")
    return WireMessage(msg_type=msg_type, seq=seq, payload=bytes(payload))


async def read_frame(reader: asyncio.StreamReader) -> WireMessage:
    try:
        header = await reader.readexactly(HEADER.size)
        msg_type, seq, length = _parse_header(header)
        payload = await reader.readexactly(length) if length else b""
    except asyncio.IncompleteReadError as e:
        raise WireProtocolError(
            f"Connection closed mid-frame ({len(e.partial)} of {e.expected} bytes)"
        ) from e
    return WireMessage(msg_type=msg_type, seq=seq, payload=payload)


async def write_frame(writer: asyncio.StreamWriter, msg: WireMessage) -> None:
    writer.write(encode_frame(msg))
    await writer.drain()


def pack_ciphertexts(pk: PublicKey, ciphertexts: Sequence[Ciphertext]) -> bytes:
    chunks = []
    for c in ciphertexts:
        if c.n != pk.n:
            raise WireProtocolError("Refusing to frame a ciphertext under a different key")
        chunks.append(to_bytes(pk.ctx_n2, c.value))
    return b"".join(chunks)


def unpack_ciphertexts(
    pk: PublicKey, payload: bytes, expected: int | None = None
) -> tuple[Ciphertext, ...]:
    width = pk.ciphertext_bytes
    count, remainder = divmod(len(payload), width)
    if remainder:
        raise WireProtocolError(
            f"Payload of {len(payload)} bytes is not a multiple of the {width}-byte ciphertext width"
        )
    if expected is not None and count != expected:
        raise WireProtocolError(f"Expected {expected} ciphertexts, got {count}")

    try:
        return tuple(
            Ciphertext(value=from_bytes(pk.ctx_n2, payload[i * width : (i + 1) * width]), n=pk.n)
            for i in range(count)
        )
    except ParameterError as e:
        raise WireProtocolError(f"Malformed ciphertext: {e}") from e


def batch_message(
    msg_type: MessageType, seq: int, pk: PublicKey, ciphertexts: Sequence[Ciphertext]
) -> WireMessage:
    return WireMessage(msg_type=msg_type, seq=seq, payload=pack_ciphertexts(pk, ciphertexts))


def hello_message(params: SessionParams) -> WireMessage:
    return WireMessage(
        msg_type=MessageType.HELLO, seq=0, payload=params.model_dump_json().encode("utf-8")
    )


def parse_hello(msg: WireMessage) -> SessionParams:
    if msg.msg_type is not MessageType.HELLO:
        raise WireProtocolError(f"Expected Hello, got {msg.msg_type.name}")
    try:
        return SessionParams.model_validate_json(msg.payload)
    except ValidationError as e:
        raise WireProtocolError(f"Malformed session parameters: {e}") from e


def shutdown_message(seq: int, reason: str = "") -> WireMessage:
    return WireMessage(msg_type=MessageType.SHUTDOWN, seq=seq, payload=reason.encode("utf-8"))


def shutdown_reason(msg: WireMessage) -> str:
    return msg.payload.decode("utf-8", errors="replace")
