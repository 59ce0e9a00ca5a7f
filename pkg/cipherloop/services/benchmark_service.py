"""Critical-path timing per key length and the derived minimum sampling period."""

import logging
import random
from collections.abc import Mapping, Sequence

from cipherloop.config import settings
from cipherloop.core.config_validator import LoopConfigValidator
from cipherloop.core.logging import LoopLogger
from cipherloop.models.enums import LoopMode, SetpointMode
from cipherloop.models.keys import PrivateKey, PublicKey
from cipherloop.models.plant import LoopPreset
from cipherloop.schemas.timing import TimingRecord, TimingSummary
from cipherloop.services.loop_service import run_closed_loop
from cipherloop.services.paillier_service import keygen

logger = logging.getLogger(__name__)

KeyPair = tuple[PublicKey, PrivateKey]


def format_us(us: float) -> str:
    if us >= 10_000:
        return f"{us / 1_000:.1f} ms"
    if us >= 10:
        return f"{us:.1f} us"
    return f"{us * 1_000:.0f} ns"


def bench_keypair(key_bits: int, seed: int | None = None) -> KeyPair:
    rng = random.Random(seed + key_bits) if seed is not None else None
    return keygen(key_bits, rng=rng)


def measure_key_length(
    preset: LoopPreset,
    keys: KeyPair,
    reps: int,
    *,
    seed: int | None = None,
    overlap_randomizer: bool = True,
    warmup: int | None = None,
) -> TimingSummary:
    pk, sk = keys
    skipped = settings.BENCH_WARMUP_STEPS if warmup is None else warmup

    result = run_closed_loop(
        preset,
        LoopMode.ENCRYPTED,
        steps=skipped + reps,
        pk=pk,
        sk=sk,
        seed=seed,
        setpoint_mode=SetpointMode.LOCAL,
        overlap_randomizer=overlap_randomizer,
        check_equivalence=False,
    )
    records: list[TimingRecord] = [row.timing for row in result.rows[skipped:] if row.timing]
    summary = TimingSummary.from_records(pk.key_bits, pk.word_count, records, overlap_randomizer)
    LoopLogger.log_benchmark_row(pk.key_bits, summary.model_dump())
    return summary


def measure_min_period(
    key_bits_list: Sequence[int],
    preset: LoopPreset,
    reps: int,
    *,
    seed: int | None = None,
    overlap_randomizer: bool = True,
    keys: Mapping[int, KeyPair] | None = None,
) -> list[TimingSummary]:
    """One summary per key length; min_period_us is the p99 critical path."""
    summaries: list[TimingSummary] = []
    for key_bits in sorted(key_bits_list):
        # timing does not depend on plaintext values, so wrap-around is tolerated here
        LoopConfigValidator.validate_or_raise(preset, key_bits, check_headroom=False)
        pair = keys[key_bits] if keys and key_bits in keys else bench_keypair(key_bits, seed)
        logger.info(f"Benchmarking {preset.name} with {key_bits}-bit keys over {reps} steps")
        summaries.append(
            measure_key_length(
                preset, pair, reps, seed=seed, overlap_randomizer=overlap_randomizer
            )
        )

    periods = [s.min_period_us for s in summaries]
    if any(b <= a for a, b in zip(periods, periods[1:])):
        logger.warning(f"Minimum sampling period is not monotone in key length: {periods}")
    return summaries


def compare_randomizer_modes(
    preset: LoopPreset, keys: KeyPair, reps: int, *, seed: int | None = None
) -> tuple[TimingSummary, TimingSummary]:
    """(overlapped, inline) summaries for the same key and schedule."""
    overlapped = measure_key_length(preset, keys, reps, seed=seed, overlap_randomizer=True)
    inline = measure_key_length(preset, keys, reps, seed=seed, overlap_randomizer=False)
    return overlapped, inline
