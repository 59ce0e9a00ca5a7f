import ast
import random
from functools import lru_cache
from pathlib import Path

from cipherloop.core.mont_arith import MontCtx
from cipherloop.schemas.controller import ControllerDesign


@lru_cache(maxsize=32)
def _radix_inverse(radix: int, modulus: int) -> int:
    return pow(radix, -1, modulus)


def mont_oracle(ctx: MontCtx, x: int, y: int) -> int:
    """x * y * R^-1 mod M with plain big-integer arithmetic."""
    return (x * y * _radix_inverse(ctx.radix, ctx.modulus)) % ctx.modulus


def naive_pow(base: int, exponent: int, modulus: int) -> int:
    """Left-to-right square-and-multiply on plain integers."""
    result = 1 % modulus
    for bit in bin(exponent)[2:]:
        result = result * result % modulus
        if bit == "1":
            result = result * base % modulus
    return result


def odd_modulus(rng: random.Random, bits: int) -> int:
    return rng.getrandbits(bits) | (1 << (bits - 1)) | 1


def grid_value(rng: random.Random, n: int = 4, m: int = 1) -> float:
    """Random point of Q(n, m), so quantization is exact."""
    return rng.randint(-(1 << (n - 1)), (1 << (n - 1)) - 1) / (1 << m)


def random_design(rng: random.Random, index: int = 0) -> ControllerDesign:
    """Resetting controller with n_x <= 3, n_y <= 2, T <= 4 on a Q(4, 1) grid."""
    n_x = rng.randint(1, 3)
    n_y = rng.randint(1, 2)
    n_u = rng.randint(1, 2)
    return ControllerDesign(
        name=f"random-{index}",
        A=[[grid_value(rng) for _ in range(n_x)] for _ in range(n_x)],
        B=[[grid_value(rng) for _ in range(n_y)] for _ in range(n_x)],
        C=[[grid_value(rng) for _ in range(n_x)] for _ in range(n_u)],
        T=rng.randint(1, 4),
        n=4,
        m=1,
        n_prime=8,
        signal_exp=1,
    )


def referenced_names(path: Path) -> set[str]:
    tree = ast.parse(path.read_text(encoding="utf-8"))
    names: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            names.add(node.id)
        elif isinstance(node, ast.Attribute):
            names.add(node.attr)
        elif isinstance(node, ast.alias):
            names.add(node.name.rsplit(".", 1)[-1])
    return names
