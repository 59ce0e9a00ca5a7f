"""Key files as ``name = hex`` lines, readable with dotenv tooling."""

import logging
import os
from pathlib import Path

from dotenv import dotenv_values

from cipherloop.core.exceptions import KeyFileError, KeyGenerationError, ParameterError
from cipherloop.models.keys import PrivateKey, PublicKey
from cipherloop.services.paillier_service import keypair_from_primes, public_key_from_modulus

logger = logging.getLogger(__name__)

PUBLIC_SUFFIX = ".pub"
PRIVATE_SUFFIX = ".key"

_PUBLIC_FIELDS = ("n",)
_PRIVATE_FIELDS = ("n", "lambda", "mu", "p", "q")


def _render(kind: str, fields: dict[str, int]) -> str:
    lines = [f"# cipherloop paillier {kind} key"]
    lines += [f"{name} = {value:x}" for name, value in fields.items()]
    return "\n".join(lines) + "\n"


def _read_fields(path: Path, required: tuple[str, ...]) -> dict[str, int]:
    if not path.is_file():
        raise KeyFileError(f"Key file not found: {path}")

    raw = dotenv_values(path)
    fields: dict[str, int] = {}
    for name in required:
        value = raw.get(name)
        if not value:
            raise KeyFileError(f"{path}: missing field '{name}'")
        try:
            fields[name] = int(value, 16)
        except ValueError as e:
            raise KeyFileError(f"{path}: field '{name}' is not hexadecimal") from e
    return fields


def public_path(prefix: str | Path) -> Path:
    return Path(f"{prefix}{PUBLIC_SUFFIX}")


def private_path(prefix: str | Path) -> Path:
    return Path(f"{prefix}{PRIVATE_SUFFIX}")


def save_public_key(path: str | Path, pk: PublicKey) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(_render("public", {"n": pk.n}), encoding="utf-8")
    target.chmod(0o644)
    return target


def save_keypair(prefix: str | Path, pk: PublicKey, sk: PrivateKey) -> tuple[Path, Path]:
    pub = save_public_key(public_path(prefix), pk)
    key = private_path(prefix)

    content = _render(
        "private",
        {"n": pk.n, "lambda": sk.lam, "mu": sk.mu, "p": sk.p, "q": sk.q},
    )
    fd = os.open(key, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w", encoding="utf-8") as handle:
        handle.write(content)
    key.chmod(0o600)

    logger.info(f"Wrote key pair {pub} and {key} (fingerprint {pk.fingerprint})")
    return pub, key


def load_public_key(path: str | Path) -> PublicKey:
    fields = _read_fields(Path(path), _PUBLIC_FIELDS)
    try:
        return public_key_from_modulus(fields["n"])
    except ParameterError as e:
        raise KeyFileError(f"{path}: {e}") from e


def load_private_key(path: str | Path) -> tuple[PublicKey, PrivateKey]:
    """Rebuilds both keys from p and q and checks the stored derived values."""
    source = Path(path)
    fields = _read_fields(source, _PRIVATE_FIELDS)

    if fields["p"] * fields["q"] != fields["n"]:
        raise KeyFileError(f"{source}: p * q does not equal n")
    try:
        pk, sk = keypair_from_primes(fields["p"], fields["q"])
    except (KeyGenerationError, ParameterError, ValueError) as e:
        raise KeyFileError(f"{source}: {e}") from e

    if sk.lam != fields["lambda"] or sk.mu != fields["mu"]:
        raise KeyFileError(f"{source}: stored lambda/mu do not match p and q")
    return pk, sk
