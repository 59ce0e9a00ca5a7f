import hashlib
from dataclasses import dataclass

from cipherloop.core.mont_arith import MontCtx


@dataclass(frozen=True, slots=True)
class PublicKey:
    n: int
    ctx_n2: MontCtx
    n_mont: int

    @property
    def key_bits(self) -> int:
        return self.n.bit_length()

    @property
    def n_squared(self) -> int:
        return self.ctx_n2.modulus

    @property
    def word_count(self) -> int:
        return self.ctx_n2.word_count

    @property
    def ciphertext_bytes(self) -> int:
        return self.ctx_n2.byte_width

    @property
    def fingerprint(self) -> str:
        raw = self.n.to_bytes((self.n.bit_length() + 7) // 8, "big")
        return hashlib.sha256(raw).hexdigest()[:16]


@dataclass(frozen=True, slots=True, repr=False)
class PrivateKey:
    p: int
    q: int
    lam: int
    mu: int
    ctx_n: MontCtx
    ctx_n2p2: MontCtx
    n_inv_r2: int
    mu_r2: int

    def __repr__(self) -> str:
        return f"PrivateKey(key_bits={self.ctx_n.modulus.bit_length()})"


@dataclass(frozen=True, slots=True)
class Ciphertext:
    value: int
    n: int


@dataclass(frozen=True, slots=True)
class RandomizerPower:
    z: int
    n: int
