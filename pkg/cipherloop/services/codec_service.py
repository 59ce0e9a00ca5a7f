"""Fixed-point quantization and the scaled embedding into Z_{2^n'}."""

import logging
import math
from collections.abc import Iterable
from fractions import Fraction

from cipherloop.core.exceptions import CodecError, CodecOverflowError, ConfigurationError
from cipherloop.models.codec import EncodedInt, Fixed
from cipherloop.schemas.codec import FixedSpec

logger = logging.getLogger(__name__)

_HALF = Fraction(1, 2)


def quantize(spec: FixedSpec, x: float | int | Fraction) -> Fixed:
    """Nearest grid point of Q(n, m); ties round away from zero, out-of-range values saturate."""
    if isinstance(x, float) and not math.isfinite(x):
        raise CodecError(f"Cannot quantize non-finite value {x}")

    scaled = Fraction(x) * (1 << spec.m)
    k = math.floor(abs(scaled) + _HALF)
    if scaled < 0:
        k = -k

    if k > spec.grid_max:
        return Fixed(k=spec.grid_max, m=spec.m, saturated=True)
    if k < spec.grid_min:
        return Fixed(k=spec.grid_min, m=spec.m, saturated=True)
    return Fixed(k=k, m=spec.m)


def quantize_vector(
    spec: FixedSpec, xs: Iterable[float | int | Fraction]
) -> tuple[list[Fixed], int]:
    values = [quantize(spec, x) for x in xs]
    saturations = sum(1 for v in values if v.saturated)
    if saturations:
        logger.debug(f"Quantizer saturated {saturations} of {len(values)} components")
    return values, saturations


def to_signed(spec: FixedSpec, residue: int) -> int:
    if residue >= 1 << (spec.n_prime - 1):
        return residue - spec.modulus
    return residue


def encode_value(spec: FixedSpec, value: Fraction | int, scale_exp: int) -> EncodedInt:
    if scale_exp < 0:
        raise CodecError(f"Scale exponent must be non-negative, got {scale_exp}")

    scaled = Fraction(value) * (1 << (scale_exp * spec.m))
    if scaled.denominator != 1:
        raise CodecError(f"{value} is not an integer after scaling by 2^{scale_exp * spec.m}")

    signed = scaled.numerator
    half_range = 1 << (spec.n_prime - 1)
    if not -half_range <= signed < half_range:
        raise CodecOverflowError(
            f"{value} at scale exponent {scale_exp} needs more than n'={spec.n_prime} bits"
        )
    return EncodedInt(residue=signed % spec.modulus, scale_exp=scale_exp)


def encode(spec: FixedSpec, f: Fixed, scale_exp: int) -> EncodedInt:
    if f.m != spec.m:
        raise CodecError(f"Fixed value uses m={f.m}, codec expects m={spec.m}")
    return encode_value(spec, f.value, scale_exp)


def decode(spec: FixedSpec, e: EncodedInt) -> Fraction:
    return Fraction(to_signed(spec, e.residue), 1 << (e.scale_exp * spec.m))


def derive_n_prime(
    n_x: int, n_u: int, T: int | None, n: int, override: int | None = None
) -> int:
    if override is not None:
        return override
    if T is None:
        raise ConfigurationError("n' cannot be derived for T=inf; set n_prime explicitly")
    return (n_x + 1) * T + n_u + n * (T + 2)
