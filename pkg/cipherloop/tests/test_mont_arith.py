import random
from concurrent.futures import ThreadPoolExecutor

import pytest

from cipherloop.core.exceptions import ParameterError
from cipherloop.core.mont_arith import (
    count_mont_mults,
    from_bytes,
    from_mont,
    mont_ctx_new,
    mont_exp,
    mont_exp_paired,
    mont_mult,
    system_contexts,
    to_bytes,
    to_mont,
)
from cipherloop.services.paillier_service import SUPPORTED_KEY_BITS
from .test_utils import mont_oracle, naive_pow, odd_modulus


class TestMontContext:

    def test_m_prime_for_35(self):
        ctx = mont_ctx_new(35)

        assert ctx.m_prime == 20597
        assert (35 * ctx.m_prime + 1) % (1 << 16) == 0

    def test_radix_has_one_spare_word(self):
        ctx = mont_ctx_new(35)

        assert ctx.word_count == 1
        assert ctx.radix == 1 << 32
        assert ctx.r_mod_m == (1 << 32) % 35
        assert ctx.r2_mod_m == (1 << 64) % 35

    def test_even_modulus_rejected(self):
        with pytest.raises(ParameterError):
            mont_ctx_new(36)

    def test_modulus_too_wide_for_word_count(self):
        with pytest.raises(ParameterError):
            mont_ctx_new((1 << 40) + 1, word_count=2)

    def test_system_contexts_share_word_count(self, keys_256):
        pk, _ = keys_256
        ctx_n, ctx_n2, ctx_n2p2 = system_contexts(pk.n)

        assert ctx_n.word_count == ctx_n2.word_count == ctx_n2p2.word_count == 32
        assert ctx_n2.modulus == pk.n * pk.n
        assert ctx_n2p2.modulus == pk.n * pk.n + 2

    def test_ciphertext_width_for_64_bit_key(self, keys_64):
        pk, _ = keys_64

        assert pk.word_count == 8
        assert pk.ciphertext_bytes == 18


class TestMontMult:

    @pytest.mark.parametrize("modulus", [35, 77, 143])
    def test_exhaustive_small_moduli(self, modulus):
        ctx = mont_ctx_new(modulus)

        for x in range(ctx.bound):
            for y in range(ctx.bound):
                t = mont_mult(ctx, x, y)
                assert 0 <= t < ctx.bound
                assert t % modulus == mont_oracle(ctx, x, y)

    @pytest.mark.parametrize("key_bits", [64, 128, 256, 512, 1024])
    def test_random_operands_against_oracle(self, key_bits):
        rng = random.Random(key_bits)
        # N^2-sized odd moduli, the width ciphertext arithmetic runs at
        modulus = rng.getrandbits(2 * key_bits) | (1 << (2 * key_bits - 1)) | 1
        ctx = mont_ctx_new(modulus)

        for _ in range(10_000):
            x = rng.randrange(ctx.bound)
            y = rng.randrange(ctx.bound)
            t = mont_mult(ctx, x, y)
            assert t < ctx.bound
            assert t % modulus == mont_oracle(ctx, x, y)

    def test_operand_out_of_range(self):
        ctx = mont_ctx_new(35)

        with pytest.raises(ParameterError):
            mont_mult(ctx, 70, 1)

    def test_to_and_from_mont(self):
        ctx = mont_ctx_new(143)

        for a in range(143):
            assert from_mont(ctx, to_mont(ctx, a)) == a

    def test_from_mont_range(self):
        ctx = mont_ctx_new(35)

        assert from_mont(ctx, 69) == from_mont(ctx, 34)
        with pytest.raises(ParameterError):
            from_mont(ctx, 70)
        with pytest.raises(ParameterError):
            from_mont(ctx, -1)


class TestMontExp:

    @pytest.mark.parametrize(
        "key_bits",
        [64, 128, 256, pytest.param(512, marks=pytest.mark.slow), pytest.param(1024, marks=pytest.mark.slow)],
    )
    def test_matches_naive_oracle(self, key_bits):
        rng = random.Random(key_bits)
        modulus = odd_modulus(rng, key_bits)
        ctx = mont_ctx_new(modulus)

        for _ in range(10_000):
            a = rng.randrange(modulus)
            e = rng.getrandbits(24)
            result = mont_exp(ctx, to_mont(ctx, a), e, 24)
            assert from_mont(ctx, result) == naive_pow(a, e, modulus)

    @pytest.mark.parametrize("key_bits", SUPPORTED_KEY_BITS)
    def test_full_length_exponents(self, key_bits):
        rng = random.Random(key_bits + 1)
        modulus = odd_modulus(rng, key_bits)
        ctx = mont_ctx_new(modulus)

        for _ in range(5):
            a = rng.randrange(modulus)
            e = rng.getrandbits(key_bits)
            result = mont_exp(ctx, to_mont(ctx, a), e, key_bits)
            assert from_mont(ctx, result) == pow(a, e, modulus)

    def test_zero_exponent_gives_one(self):
        ctx = mont_ctx_new(143)

        assert from_mont(ctx, mont_exp(ctx, to_mont(ctx, 5), 0, 8)) == 1

    def test_work_is_independent_of_exponent(self):
        ctx = mont_ctx_new((1 << 127) - 1)
        rng = random.Random(11)
        exponents = [0, 1, (1 << 64) - 1, 1 << 63] + [rng.getrandbits(64) for _ in range(100)]

        for exponent in exponents:
            with count_mont_mults() as counter:
                mont_exp(ctx, ctx.r_mod_m, exponent, 64)
            assert counter.calls == 128

    def test_exponent_longer_than_declared(self):
        ctx = mont_ctx_new(143)

        with pytest.raises(ParameterError):
            mont_exp(ctx, ctx.r_mod_m, 1 << 8, 8)

    def test_paired_matches_sequential(self):
        rng = random.Random(3)
        modulus = rng.getrandbits(128) | (1 << 127) | 1
        ctx = mont_ctx_new(modulus)

        with ThreadPoolExecutor(max_workers=2) as executor:
            for _ in range(20):
                base = to_mont(ctx, rng.randrange(modulus))
                e = rng.getrandbits(64)
                paired = mont_exp_paired(ctx, base, e, 64, executor)
                assert from_mont(ctx, paired) == from_mont(ctx, mont_exp(ctx, base, e, 64))


class TestResidueBytes:

    def test_fixed_width_big_endian(self):
        ctx = mont_ctx_new(35)

        assert to_bytes(ctx, 1) == b"\x00\x00\x00\x01"
        assert from_bytes(ctx, b"\x00\x00\x00\x45") == 69

    def test_wrong_length_rejected(self):
        ctx = mont_ctx_new(35)

        with pytest.raises(ParameterError):
            from_bytes(ctx, b"\x00\x01")

    def test_value_beyond_bound_rejected(self):
        ctx = mont_ctx_new(35)

        with pytest.raises(ParameterError):
            from_bytes(ctx, (70).to_bytes(4, "big"))
        with pytest.raises(ParameterError):
            to_bytes(ctx, 70)
