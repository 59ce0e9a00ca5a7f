import math
import random
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from cipherloop.core.exceptions import CodecError, CodecOverflowError, ConfigurationError
from cipherloop.models.codec import EncodedInt
from cipherloop.schemas.codec import FixedSpec
from cipherloop.services.codec_service import (
    decode,
    derive_n_prime,
    encode,
    encode_value,
    quantize,
    quantize_vector,
    to_signed,
)
from cipherloop.services.controller_service import (
    build_controller_spec,
    decode_outputs,
    encode_signals,
    initial_int_state,
    int_reference_step,
    reference_step,
)
from cipherloop.services.presets import reset_pi_design


class TestQuantize:

    def test_error_within_half_step(self):
        spec = FixedSpec(n=16, m=8, n_prime=32)
        rng = random.Random(5)
        limit = spec.grid_max / (1 << spec.m)

        for _ in range(5000):
            x = rng.uniform(-limit, limit)
            f = quantize(spec, x)
            assert not f.saturated
            assert abs(float(f) - x) <= 2 ** -(spec.m + 1)

    def test_ties_round_away_from_zero(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)

        assert quantize(spec, 0.03125).k == 1
        assert quantize(spec, -0.03125).k == -1
        assert quantize(spec, 0.09375).k == 2
        assert quantize(spec, 0.0).k == 0

    def test_saturation(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)

        high = quantize(spec, 100.0)
        low = quantize(spec, -100.0)
        assert high.k == 127 and high.saturated
        assert low.k == -128 and low.saturated

    def test_non_finite_rejected(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)

        with pytest.raises(CodecError):
            quantize(spec, math.nan)
        with pytest.raises(CodecError):
            quantize(spec, math.inf)

    def test_vector_counts_saturations(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)

        values, saturated = quantize_vector(spec, [0.5, 9.0, -9.0])
        assert [v.k for v in values] == [8, 127, -128]
        assert saturated == 2


class TestFixedSpec:

    def test_ordering_enforced(self):
        with pytest.raises(ValidationError):
            FixedSpec(n=8, m=8, n_prime=16)
        with pytest.raises(ValidationError):
            FixedSpec(n=20, m=4, n_prime=16)

    def test_grid_bounds(self):
        spec = FixedSpec(n=4, m=1, n_prime=12)

        assert spec.grid_min == -8
        assert spec.grid_max == 7
        assert spec.modulus == 4096


class TestTwosComplement:

    def test_exhaustive_12_bit_ring(self):
        spec = FixedSpec(n=4, m=1, n_prime=12)

        for residue in range(spec.modulus):
            signed = to_signed(spec, residue)
            assert -2048 <= signed < 2048
            assert signed % spec.modulus == residue
            assert encode_value(spec, signed, 0).residue == residue

    def test_negative_values_wrap(self):
        spec = FixedSpec(n=4, m=1, n_prime=12)

        assert encode_value(spec, -1, 0).residue == 4095
        assert to_signed(spec, 2048) == -2048


class TestEncode:

    def test_scaling_by_exponent(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)
        f = quantize(spec, 0.25)

        assert encode(spec, f, 1).residue == 4
        assert encode(spec, f, 2).residue == 64
        assert decode(spec, EncodedInt(residue=64, scale_exp=2)) == Fraction(1, 4)

    def test_negative_decode(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)
        encoded = encode(spec, quantize(spec, -1.5), 1)

        assert decode(spec, encoded) == Fraction(-3, 2)

    def test_fraction_at_scale_zero_rejected(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)

        with pytest.raises(CodecError):
            encode_value(spec, Fraction(1, 2), 0)

    def test_overflow(self):
        spec = FixedSpec(n=8, m=4, n_prime=12)

        with pytest.raises(CodecOverflowError):
            encode_value(spec, 9, 2)

    def test_mismatched_fraction_bits(self):
        spec = FixedSpec(n=8, m=4, n_prime=16)
        other = FixedSpec(n=8, m=2, n_prime=16)

        with pytest.raises(CodecError):
            encode(spec, quantize(other, 0.25), 1)


class TestRingWidth:

    def test_derived_from_dimensions(self):
        # (n_x + 1) T + n_u + n (T + 2)
        assert derive_n_prime(2, 1, 4, 16) == 3 * 4 + 1 + 16 * 6

    def test_override_wins(self):
        assert derive_n_prime(4, 1, None, 20, override=32) == 32

    def test_never_reset_needs_override(self):
        with pytest.raises(ConfigurationError):
            derive_n_prime(4, 1, None, 20)


class TestRoundTrip:

    @pytest.mark.parametrize("scale_exp", [1, 2, 3])
    def test_random_values_survive_encoding(self, scale_exp):
        spec = FixedSpec(n=16, m=8, n_prime=64)
        rng = random.Random(100 + scale_exp)
        half_range = 1 << (spec.n_prime - 1)
        denominator = 1 << (scale_exp * spec.m)

        for _ in range(10_000):
            value = Fraction(rng.randrange(-half_range, half_range), denominator)
            encoded = encode_value(spec, value, scale_exp)

            assert 0 <= encoded.residue < spec.modulus
            assert decode(spec, encoded) == value

    @pytest.mark.parametrize("scale_exp", [1, 2, 3])
    def test_grid_points_survive_encoding(self, scale_exp):
        spec = FixedSpec(n=16, m=8, n_prime=64)
        rng = random.Random(200 + scale_exp)

        for _ in range(10_000):
            f = quantize(spec, rng.uniform(-128.0, 128.0))
            assert decode(spec, encode(spec, f, scale_exp)) == f.value


class TestQuantizationFidelity:

    def test_reset_pi_error_halves_per_fraction_bit(self):
        # 1/3 is never on the grid, so the gain error is exactly 2^-m / 3 for every m
        errors: dict[int, float] = {}
        for m in range(4, 11):
            design = reset_pi_design(dt=1 / 3, m=m).model_copy(update={"n_prime": None})
            spec = build_controller_spec(design)
            rng = random.Random(31)

            st = initial_int_state(spec)
            x = np.zeros(design.n_x)
            s = [1.0]
            s_hat, _ = encode_signals(spec, s)
            worst = 0.0
            for k in range(40):
                y = [rng.randint(-48, 48) / 16]
                y_hat, _ = encode_signals(spec, y)
                step = int_reference_step(spec, st, s_hat, y_hat)
                x, u = reference_step(design, x, s, y, k)
                assert not step.overflow

                worst = max(worst, abs(decode_outputs(spec, step.u_hat, k)[0] - float(u[0])))
                st = step.state
            errors[m] = worst

        assert errors[4] > 0
        for m in range(4, 10):
            assert errors[m] / errors[m + 1] == pytest.approx(2.0, rel=0.01)
