import os
import random
import sys
from pathlib import Path

import pytest

os.environ.setdefault("CIPHERLOOP_LOG", "WARNING")
os.environ.setdefault("MILLER_RABIN_ROUNDS", "40")
os.environ.setdefault("SKIP_ZERO_GAINS", "false")
os.environ.setdefault("BENCH_WARMUP_STEPS", "3")

project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from cipherloop.models.keys import PrivateKey, PublicKey
from cipherloop.models.plant import LoopPreset
from cipherloop.services.paillier_service import keygen
from cipherloop.services.presets import qube_preset, reset_pi_preset, static_preset

KeyPair = tuple[PublicKey, PrivateKey]


@pytest.fixture(scope="session")
def keys_64() -> KeyPair:
    return keygen(64, rng=random.Random(6401))


@pytest.fixture(scope="session")
def keys_128() -> KeyPair:
    return keygen(128, rng=random.Random(12801))


@pytest.fixture(scope="session")
def keys_256() -> KeyPair:
    return keygen(256, rng=random.Random(25601))


@pytest.fixture
def static_loop() -> LoopPreset:
    return static_preset()


@pytest.fixture
def qube_loop() -> LoopPreset:
    return qube_preset()


@pytest.fixture
def reset_pi_loop() -> LoopPreset:
    return reset_pi_preset()


@pytest.fixture
def loop_config_file(tmp_path: Path):
    def write(**values: object) -> Path:
        path = tmp_path / "loop.conf"
        lines = ["# cipherloop loop configuration"]
        lines += [f"{key} = {value}" for key, value in values.items()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write
