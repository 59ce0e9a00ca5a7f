"""Paillier scheme with g = N + 1 on Montgomery-form ciphertexts modulo N^2."""

import logging
import secrets
from concurrent.futures import Executor
from math import gcd, lcm
from typing import Protocol

from cipherloop.config import settings
from cipherloop.core.exceptions import (
    KeyGenerationError,
    KeyMismatchError,
    ParameterError,
)
from cipherloop.core.logging import LoopLogger
from cipherloop.core.mont_arith import (
    from_mont,
    mont_exp,
    mont_exp_paired,
    mont_mult,
    system_contexts,
)
from cipherloop.models.keys import Ciphertext, PrivateKey, PublicKey, RandomizerPower

logger = logging.getLogger(__name__)

SUPPORTED_KEY_BITS = (64, 128, 256, 512, 1024)
MIN_KEY_BITS = SUPPORTED_KEY_BITS[0]

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


class EntropySource(Protocol):
    def randrange(self, start: int, stop: int) -> int: ...

    def getrandbits(self, k: int, /) -> int: ...


def is_probable_prime(n: int, rounds: int, rng: EntropySource) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p

    r, s = 0, n - 1
    while s % 2 == 0:
        r += 1
        s //= 2

    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, s, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: EntropySource, rounds: int, attempts: int) -> int:
    top_bits = 0b11 << (bits - 2)
    for _ in range(attempts):
        candidate = rng.getrandbits(bits) | top_bits | 1
        if is_probable_prime(candidate, rounds, rng):
            return candidate
    raise KeyGenerationError(f"No {bits}-bit prime found after {attempts} candidates")


def public_key_from_modulus(n: int) -> PublicKey:
    if n < 15 or n % 2 == 0:
        raise ParameterError(f"Not a Paillier modulus: {n}")
    _, ctx_n2, _ = system_contexts(n)
    return PublicKey(n=n, ctx_n2=ctx_n2, n_mont=(n * ctx_n2.radix) % ctx_n2.modulus)


def keypair_from_primes(p: int, q: int) -> tuple[PublicKey, PrivateKey]:
    if p == q:
        raise KeyGenerationError("p and q must be distinct primes")

    n = p * q
    if gcd(n, (p - 1) * (q - 1)) != 1:
        raise KeyGenerationError(f"gcd(N, (p-1)(q-1)) != 1 for N={n}")

    lam = lcm(p - 1, q - 1)
    mu = pow(lam, -1, n)

    ctx_n, ctx_n2, ctx_n2p2 = system_contexts(n)
    radix = ctx_n2.radix
    r2 = radix * radix

    public_key = PublicKey(n=n, ctx_n2=ctx_n2, n_mont=(n * radix) % ctx_n2.modulus)
    private_key = PrivateKey(
        p=p,
        q=q,
        lam=lam,
        mu=mu,
        ctx_n=ctx_n,
        ctx_n2p2=ctx_n2p2,
        n_inv_r2=(pow(n, -1, ctx_n2p2.modulus) * r2) % ctx_n2p2.modulus,
        mu_r2=(mu * r2) % n,
    )
    return public_key, private_key


def keygen(
    key_bits: int, rng: EntropySource | None = None
) -> tuple[PublicKey, PrivateKey]:
    if key_bits not in SUPPORTED_KEY_BITS:
        raise ParameterError(
            f"Unsupported key size {key_bits}; choose one of {SUPPORTED_KEY_BITS}"
        )

    source: EntropySource = rng if rng is not None else secrets.SystemRandom()
    half = key_bits // 2

    for attempt in range(settings.KEYGEN_ATTEMPTS):
        p = _random_prime(half, source, settings.MILLER_RABIN_ROUNDS, settings.PRIME_SEARCH_ATTEMPTS)
        q = _random_prime(half, source, settings.MILLER_RABIN_ROUNDS, settings.PRIME_SEARCH_ATTEMPTS)
        if p == q:
            logger.debug(f"Key generation attempt {attempt}: drew equal primes, retrying")
            continue
        if (p * q).bit_length() != key_bits or gcd(p * q, (p - 1) * (q - 1)) != 1:
            continue

        public_key, private_key = keypair_from_primes(p, q)
        LoopLogger.log_key_generated(key_bits, public_key.word_count, public_key.fingerprint)
        return public_key, private_key

    raise KeyGenerationError(
        f"Key generation for {key_bits} bits failed after {settings.KEYGEN_ATTEMPTS} attempts"
    )


def _check_key(pk: PublicKey, *items: Ciphertext | RandomizerPower) -> None:
    for item in items:
        if item.n != pk.n:
            raise KeyMismatchError("Ciphertext was produced under a different public key")


def sample_randomizer(pk: PublicKey, rng: EntropySource) -> int:
    r = rng.randrange(1, pk.n)
    if pk.key_bits < MIN_KEY_BITS:
        while gcd(r, pk.n) != 1:
            r = rng.randrange(1, pk.n)
    return r


def calc_randomizer(
    pk: PublicKey, r: int, executor: Executor | None = None
) -> RandomizerPower:
    # r is fed to the exponentiation as if it already were in Montgomery form
    bits = pk.n.bit_length()
    if executor is not None:
        z = mont_exp_paired(pk.ctx_n2, r, pk.n, bits, executor)
    else:
        z = mont_exp(pk.ctx_n2, r, pk.n, bits)
    return RandomizerPower(z=z, n=pk.n)


def encrypt(pk: PublicKey, t: int, z: RandomizerPower) -> Ciphertext:
    if not 0 <= t < pk.n:
        raise ParameterError(f"Plaintext must lie in [0, N), got {t}")
    _check_key(pk, z)

    ctx = pk.ctx_n2
    var1 = mont_mult(ctx, pk.n_mont, t)
    # var1 is a multiple of N below 2N^2, so var1 + 1 stays in range
    var2 = mont_mult(ctx, var1 + 1, ctx.r2_mod_m)
    return Ciphertext(value=mont_mult(ctx, z.z, var2), n=pk.n)


def encrypt_zero_unit(pk: PublicKey) -> Ciphertext:
    return Ciphertext(value=pk.ctx_n2.r_mod_m, n=pk.n)


def encrypt_deterministic(pk: PublicKey, t: int) -> Ciphertext:
    return encrypt(pk, t, RandomizerPower(z=pk.ctx_n2.r_mod_m, n=pk.n))


def decrypt(sk: PrivateKey, pk: PublicKey, c: Ciphertext) -> int:
    _check_key(pk, c)
    ctx_n2 = pk.ctx_n2
    ctx_n2p2 = sk.ctx_n2p2
    ctx_n = sk.ctx_n

    t1 = mont_exp(ctx_n2, c.value, sk.lam, sk.lam.bit_length())
    t2 = from_mont(ctx_n2, t1)
    # (t2 - 1) / N as an exact quotient through N^-1 modulo N^2 + 2
    t3 = mont_mult(ctx_n2p2, (t2 - 1) % ctx_n2p2.modulus, sk.n_inv_r2)
    t4 = from_mont(ctx_n2p2, t3)
    if t4 >= ctx_n.bound:
        logger.warning("Decryption of a malformed ciphertext, result is unspecified")
        t4 %= ctx_n.modulus
    t5 = mont_mult(ctx_n, t4, sk.mu_r2)
    return from_mont(ctx_n, t5)


def hom_add(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    _check_key(pk, c1, c2)
    return Ciphertext(value=mont_mult(pk.ctx_n2, c1.value, c2.value), n=pk.n)


def hom_scale(pk: PublicKey, t: int, c: Ciphertext, bits: int | None = None) -> Ciphertext:
    if not 0 <= t < pk.n:
        raise ParameterError(f"Scalar must lie in [0, N), got {t}")
    _check_key(pk, c)
    exponent_bits = bits if bits is not None else pk.n.bit_length()
    return Ciphertext(value=mont_exp(pk.ctx_n2, c.value, t, exponent_bits), n=pk.n)


def to_canonical(pk: PublicKey, c: Ciphertext) -> int:
    _check_key(pk, c)
    return from_mont(pk.ctx_n2, c.value)
