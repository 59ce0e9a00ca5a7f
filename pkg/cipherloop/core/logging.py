import json
import logging
from datetime import datetime, timezone
from pathlib import Path

session_logger = logging.getLogger("cipherloop.session")
timing_logger = logging.getLogger("cipherloop.timing")
keys_logger = logging.getLogger("cipherloop.keys")


def configure_logging(level: int | str, log_format: str, log_path: str | None = None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_path:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_path, encoding="utf-8"))

    logging.basicConfig(level=level, format=log_format, handlers=handlers, force=True)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


class LoopLogger:
    @staticmethod
    def log_session_started(role: str, peer: str, params: dict[str, object]):
        log_data: dict[str, object] = {
            "event_type": "session_started",
            "role": role,
            "peer": peer,
            "params": params,
            "timestamp": _timestamp(),
        }
        session_logger.info(f"Session started: {json.dumps(log_data)}")

    @staticmethod
    def log_session_refused(role: str, peer: str, reason: str):
        log_data: dict[str, object] = {
            "event_type": "session_refused",
            "role": role,
            "peer": peer,
            "reason": reason,
            "timestamp": _timestamp(),
        }
        session_logger.warning(f"Session refused: {json.dumps(log_data)}")

    @staticmethod
    def log_session_finished(role: str, steps: int, summary: dict[str, object] | None = None):
        log_data: dict[str, object] = {
            "event_type": "session_finished",
            "role": role,
            "steps": steps,
            "timestamp": _timestamp(),
        }
        if summary:
            log_data.update(summary)
        session_logger.info(f"Session finished: {json.dumps(log_data)}")

    @staticmethod
    def log_frame_discarded(role: str, msg_type: str, seq: int, expected: int):
        log_data: dict[str, object] = {
            "event_type": "frame_discarded",
            "role": role,
            "msg_type": msg_type,
            "seq": seq,
            "expected": expected,
            "timestamp": _timestamp(),
        }
        session_logger.warning(f"Out-of-order frame discarded: {json.dumps(log_data)}")

    @staticmethod
    def log_deadline_miss(step: int, total_us: float, period_us: int, held_input: bool):
        log_data: dict[str, object] = {
            "event_type": "deadline_miss",
            "step": step,
            "total_us": round(total_us, 1),
            "sample_period_us": period_us,
            "held_input": held_input,
            "timestamp": _timestamp(),
        }
        level = logging.WARNING if held_input else logging.INFO
        timing_logger.log(level, f"Deadline missed: {json.dumps(log_data)}")

    @staticmethod
    def log_benchmark_row(key_bits: int, row: dict[str, object]):
        log_data: dict[str, object] = {
            "event_type": "benchmark_row",
            "key_bits": key_bits,
            "timestamp": _timestamp(),
        }
        log_data.update(row)
        timing_logger.info(f"Benchmark: {json.dumps(log_data)}")

    @staticmethod
    def log_key_generated(key_bits: int, word_count: int, fingerprint: str):
        log_data: dict[str, object] = {
            "event_type": "key_generated",
            "key_bits": key_bits,
            "word_count": word_count,
            "fingerprint": fingerprint,
            "timestamp": _timestamp(),
        }
        keys_logger.info(f"Key pair generated: {json.dumps(log_data)}")
