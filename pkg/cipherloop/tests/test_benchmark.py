import random

import pytest

from cipherloop.core.mont_arith import mont_ctx_new, mont_mult
from cipherloop.services.benchmark_service import (
    bench_keypair,
    compare_randomizer_modes,
    format_us,
    measure_key_length,
    measure_min_period,
)
from .test_utils import mont_oracle


class TestFormatting:

    @pytest.mark.parametrize(
        "us,text", [(12_500.0, "12.5 ms"), (250.0, "250.0 us"), (0.5, "500 ns")]
    )
    def test_format_us(self, us, text):
        assert format_us(us) == text

    def test_seeded_bench_keys(self):
        assert bench_keypair(64, seed=10)[0].n == bench_keypair(64, seed=10)[0].n


class TestMontMultSpeed:

    @pytest.mark.parametrize("key_bits", [64, 256, 1024])
    def test_mont_mult(self, benchmark, key_bits):
        rng = random.Random(key_bits)
        modulus = rng.getrandbits(2 * key_bits) | (1 << (2 * key_bits - 1)) | 1
        ctx = mont_ctx_new(modulus)
        x, y = rng.randrange(ctx.bound), rng.randrange(ctx.bound)

        benchmark.group = "mont_mult"
        result = benchmark.pedantic(mont_mult, args=(ctx, x, y), rounds=100, iterations=10)
        assert result % modulus == mont_oracle(ctx, x, y)


@pytest.mark.slow
class TestMinimumPeriod:

    def test_period_grows_with_key_length(self, static_loop):
        summaries = measure_min_period([64, 128, 256, 512], static_loop, 40, seed=0)

        periods = [s.min_period_us for s in summaries]
        assert [s.key_bits for s in summaries] == [64, 128, 256, 512]
        assert all(a < b for a, b in zip(periods, periods[1:]))
        assert periods[-1] / periods[0] > 8

    def test_overlapped_randomizer_is_faster(self, static_loop, keys_256):
        overlapped, inline = compare_randomizer_modes(static_loop, keys_256, 300, seed=0)

        assert overlapped.overlap_randomizer and not inline.overlap_randomizer
        assert overlapped.median_us < inline.median_us

    def test_step_time_is_steady(self, static_loop, keys_128):
        summary = measure_key_length(static_loop, keys_128, 1000, seed=0, warmup=20)

        assert summary.steps == 1000
        assert summary.jitter_ratio < 3.0
