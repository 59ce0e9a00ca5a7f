"""Exhaustive small-parameter checks runnable on any host before a session."""

import logging
import random
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from math import gcd

from cipherloop.core.mont_arith import (
    count_mont_mults,
    from_mont,
    mont_ctx_new,
    mont_exp,
    mont_mult,
)
from cipherloop.schemas.codec import FixedSpec
from cipherloop.services.codec_service import encode_value, to_signed
from cipherloop.services.paillier_service import (
    calc_randomizer,
    decrypt,
    encrypt,
    hom_add,
    hom_scale,
    keypair_from_primes,
)

logger = logging.getLogger(__name__)

TINY_PRIMES = ((3, 5), (5, 7), (7, 11))
TINY_MODULI = (35, 77, 143)


@dataclass
class SelftestCheck:
    name: str
    passed: bool
    detail: str = ""
    duration_s: float = 0.0


@dataclass
class SelftestReport:
    checks: list[SelftestCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[SelftestCheck]:
        return [check for check in self.checks if not check.passed]


def check_paillier_tiny() -> str | None:
    for p, q in TINY_PRIMES:
        pk, sk = keypair_from_primes(p, q)
        n = pk.n
        units = [r for r in range(1, n) if gcd(r, n) == 1]
        randomizers = [calc_randomizer(pk, r) for r in units]

        for t in range(n):
            for z in randomizers:
                if decrypt(sk, pk, encrypt(pk, t, z)) != t:
                    return f"N={n}: decrypt(encrypt({t})) failed"

        z = randomizers[0]
        ciphertexts = [encrypt(pk, t, z) for t in range(n)]
        for a in range(n):
            for b in range(n):
                if decrypt(sk, pk, hom_add(pk, ciphertexts[a], ciphertexts[b])) != (a + b) % n:
                    return f"N={n}: hom_add({a}, {b}) failed"
                if decrypt(sk, pk, hom_scale(pk, a, ciphertexts[b])) != (a * b) % n:
                    return f"N={n}: hom_scale({a}, {b}) failed"
    return None


def check_mont_mult_tiny() -> str | None:
    for modulus in TINY_MODULI:
        ctx = mont_ctx_new(modulus)
        r_inv = pow(ctx.radix, -1, modulus)
        for x in range(ctx.bound):
            for y in range(ctx.bound):
                t = mont_mult(ctx, x, y)
                if t >= ctx.bound or t % modulus != (x * y * r_inv) % modulus:
                    return f"M={modulus}: mont_mult({x}, {y}) = {t}"
    return None


def check_mont_mult_random(key_bits: int = 256, cases: int = 500, seed: int = 0) -> str | None:
    rng = random.Random(seed)
    modulus = rng.getrandbits(key_bits) | (1 << (key_bits - 1)) | 1
    ctx = mont_ctx_new(modulus)
    r_inv = pow(ctx.radix, -1, modulus)
    for _ in range(cases):
        x = rng.randrange(ctx.bound)
        y = rng.randrange(ctx.bound)
        t = mont_mult(ctx, x, y)
        if t >= ctx.bound or t % modulus != (x * y * r_inv) % modulus:
            return f"{key_bits}-bit modulus: mont_mult mismatch"
    return None


def check_binomial_shortcut(cases: int = 100, seed: int = 0) -> str | None:
    # 61 and 53 give a 12-bit N, small enough to keep the check instant
    pk, _ = keypair_from_primes(61, 53)
    n, n_squared = pk.n, pk.n_squared
    r_inv = pow(pk.ctx_n2.radix, -1, n_squared)
    rng = random.Random(seed)
    for _ in range(cases):
        t = rng.randrange(n)
        r = rng.randrange(1, n)
        if gcd(r, n) != 1:
            continue
        effective_r = (r * r_inv) % n_squared
        expected = (pow(n + 1, t, n_squared) * pow(effective_r, n, n_squared)) % n_squared
        c = encrypt(pk, t, calc_randomizer(pk, r))
        if from_mont(pk.ctx_n2, c.value) != expected:
            return f"N={n}: (Nt+1) r^N differs from (N+1)^t r^N for t={t}"
    return None


def check_work_constancy(bits: int = 64, samples: int = 20, seed: int = 0) -> str | None:
    ctx = mont_ctx_new((1 << 127) - 1)
    rng = random.Random(seed)
    exponents = [0, (1 << bits) - 1] + [rng.getrandbits(bits) for _ in range(samples)]
    counts = set()
    for exponent in exponents:
        with count_mont_mults() as counter:
            mont_exp(ctx, ctx.r_mod_m, exponent, bits)
        counts.add(counter.calls)
    if counts != {2 * bits}:
        return f"mont_exp call counts vary with the exponent: {sorted(counts)}"
    return None


def check_twos_complement(n_prime: int = 12) -> str | None:
    spec = FixedSpec(n=4, m=1, n_prime=n_prime)
    half = 1 << (n_prime - 1)
    for residue in range(spec.modulus):
        signed = to_signed(spec, residue)
        if not -half <= signed < half or signed % spec.modulus != residue:
            return f"to_signed({residue}) = {signed}"
        if encode_value(spec, signed, 0).residue != residue:
            return f"encode_value({signed}) does not return residue {residue}"
    return None


# name -> (check, whether it draws random cases from the seed)
CHECKS: dict[str, tuple[Callable[..., str | None], bool]] = {
    "paillier_tiny_exhaustive": (check_paillier_tiny, False),
    "mont_mult_tiny_exhaustive": (check_mont_mult_tiny, False),
    "mont_mult_random_256": (check_mont_mult_random, True),
    "binomial_shortcut": (check_binomial_shortcut, True),
    "mont_exp_work_constancy": (check_work_constancy, True),
    "twos_complement_12": (check_twos_complement, False),
}


def run_selftest(names: list[str] | None = None, seed: int = 0) -> SelftestReport:
    report = SelftestReport()
    for name, (check, seeded) in CHECKS.items():
        if names and name not in names:
            continue
        start = time.perf_counter()
        try:
            failure = check(seed=seed) if seeded else check()
        except Exception as e:
            logger.exception(f"Self-test {name} raised")
            failure = f"{type(e).__name__}: {e}"
        duration = time.perf_counter() - start

        report.checks.append(
            SelftestCheck(name=name, passed=failure is None, detail=failure or "", duration_s=duration)
        )
        if failure:
            logger.error(f"Self-test {name} failed: {failure}")
        else:
            logger.info(f"Self-test {name} passed in {duration:.2f}s")
    return report
