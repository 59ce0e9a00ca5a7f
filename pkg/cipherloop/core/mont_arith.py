"""Word-serial Montgomery arithmetic over 16-bit words.

Residues are plain Python ints kept in the modified range [0, 2M); only
``from_mont`` returns canonical values below M.
"""

import logging
from collections.abc import Iterator
from concurrent.futures import Executor
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import TypeAlias

from cipherloop.core.exceptions import ParameterError

logger = logging.getLogger(__name__)

WORD_BITS = 16
WORD_MASK = (1 << WORD_BITS) - 1

MontForm: TypeAlias = int


@dataclass
class MultCounter:
    calls: int = 0


_active_counter: ContextVar[MultCounter | None] = ContextVar(
    "mont_mult_counter", default=None
)


@contextmanager
def count_mont_mults() -> Iterator[MultCounter]:
    counter = MultCounter()
    token = _active_counter.set(counter)
    try:
        yield counter
    finally:
        _active_counter.reset(token)


@dataclass(frozen=True, slots=True)
class MontCtx:
    modulus: int
    word_count: int
    m_prime: int
    r_mod_m: int
    r2_mod_m: int

    @property
    def radix_exp(self) -> int:
        return WORD_BITS * (self.word_count + 1)

    @property
    def radix(self) -> int:
        return 1 << self.radix_exp

    @property
    def bound(self) -> int:
        return self.modulus << 1

    @property
    def byte_width(self) -> int:
        return (self.radix_exp + 7) // 8


def word_count_for(modulus: int) -> int:
    return max(1, -(-modulus.bit_length() // WORD_BITS))


def mont_ctx_new(modulus: int, word_count: int | None = None) -> MontCtx:
    if modulus < 3 or modulus % 2 == 0:
        raise ParameterError(f"Montgomery modulus must be odd and >= 3, got {modulus}")

    w = word_count_for(modulus) if word_count is None else word_count
    if modulus >= 1 << (WORD_BITS * w):
        raise ParameterError(
            f"Modulus of {modulus.bit_length()} bits does not fit into {w} words"
        )

    # M * M' == -1 (mod 2^16)
    m_prime = -pow(modulus, -1, 1 << WORD_BITS) & WORD_MASK
    radix = 1 << (WORD_BITS * (w + 1))

    return MontCtx(
        modulus=modulus,
        word_count=w,
        m_prime=m_prime,
        r_mod_m=radix % modulus,
        r2_mod_m=(radix * radix) % modulus,
    )


def system_contexts(n: int) -> tuple[MontCtx, MontCtx, MontCtx]:
    """Contexts over N, N^2 and N^2 + 2 sharing the word count of N^2 + 2."""
    n_squared = n * n
    w = word_count_for(n_squared + 2)
    return (
        mont_ctx_new(n, w),
        mont_ctx_new(n_squared, w),
        mont_ctx_new(n_squared + 2, w),
    )


def _cios(modulus: int, m_prime: int, iterations: int, x: int, y: int) -> int:
    t = 0
    for _ in range(iterations):
        z = x * (y & WORD_MASK)
        y >>= WORD_BITS
        m = (((t + z) & WORD_MASK) * m_prime) & WORD_MASK
        t = (t + z + m * modulus) >> WORD_BITS
    return t


def mont_mult(ctx: MontCtx, x: int, y: int) -> int:
    """Return T < 2M with T == x*y*R^-1 (mod M), always running w+1 iterations."""
    bound = ctx.modulus << 1
    if not 0 <= x < bound or not 0 <= y < bound:
        raise ParameterError(f"Operands must lie in [0, 2M) for modulus {ctx.modulus}")

    counter = _active_counter.get()
    if counter is not None:
        counter.calls += 1

    return _cios(ctx.modulus, ctx.m_prime, ctx.word_count + 1, x, y)


def to_mont(ctx: MontCtx, a: int) -> MontForm:
    if not 0 <= a < ctx.modulus:
        raise ParameterError(f"Value must lie in [0, M) for modulus {ctx.modulus}")
    return mont_mult(ctx, a, ctx.r2_mod_m)


def from_mont(ctx: MontCtx, x: MontForm) -> int:
    if not 0 <= x < ctx.bound:
        raise ParameterError(f"Montgomery residue must lie in [0, 2M) for modulus {ctx.modulus}")
    t = mont_mult(ctx, x, 1)
    return t - ctx.modulus if t >= ctx.modulus else t


def _check_exponent(exponent: int, bits: int) -> None:
    if bits < 1:
        raise ParameterError(f"Exponent bit length must be positive, got {bits}")
    if exponent < 0 or exponent.bit_length() > bits:
        raise ParameterError(
            f"Exponent of {exponent.bit_length()} bits exceeds declared length {bits}"
        )


def mont_exp(ctx: MontCtx, base: MontForm, exponent: int, bits: int) -> MontForm:
    """Right-to-left exponentiation; performs 2*bits multiplications for every exponent."""
    _check_exponent(exponent, bits)

    acc = ctx.r_mod_m
    square = base
    for i in range(bits):
        candidate = mont_mult(ctx, acc, square)
        if (exponent >> i) & 1:
            acc = candidate
        square = mont_mult(ctx, square, square)
    return acc


def mont_exp_paired(
    ctx: MontCtx, base: MontForm, exponent: int, bits: int, executor: Executor
) -> MontForm:
    _check_exponent(exponent, bits)

    acc = ctx.r_mod_m
    square = base
    for i in range(bits):
        accumulate = executor.submit(mont_mult, ctx, acc, square)
        squared = executor.submit(mont_mult, ctx, square, square)
        candidate = accumulate.result()
        if (exponent >> i) & 1:
            acc = candidate
        square = squared.result()
    return acc


def to_bytes(ctx: MontCtx, value: int) -> bytes:
    if not 0 <= value < ctx.bound:
        raise ParameterError("Residue outside [0, 2M) cannot be serialized")
    return value.to_bytes(ctx.byte_width, "big")


def from_bytes(ctx: MontCtx, data: bytes) -> int:
    if len(data) != ctx.byte_width:
        raise ParameterError(
            f"Expected {ctx.byte_width} bytes for a residue, got {len(data)}"
        )
    value = int.from_bytes(data, "big")
    if value >= ctx.bound:
        raise ParameterError("Deserialized residue outside [0, 2M)")
    return value
