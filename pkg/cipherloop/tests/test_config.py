import pytest
from pydantic import ValidationError

from cipherloop.config import Settings, load_loop_config
from cipherloop.core.config_validator import LoopConfigValidator
from cipherloop.core.exceptions import ConfigurationError
from cipherloop.models.enums import DeadlinePolicy, Preset, SetpointMode
from cipherloop.schemas.config import LoopConfig, parse_address
from cipherloop.services.presets import build_preset, preset_from_config


class TestSettings:

    def test_log_level_normalized(self):
        assert Settings(CIPHERLOOP_LOG="debug").CIPHERLOOP_LOG == "DEBUG"

    def test_invalid_log_level(self):
        with pytest.raises(ValidationError):
            Settings(CIPHERLOOP_LOG="chatty")


class TestLoopConfigFile:

    def test_parse_file_with_comments(self, loop_config_file):
        path = loop_config_file(
            key_bits=128, preset="reset_pi", T="inf", n_prime=40, setpoint_mode="remote"
        )

        config = load_loop_config(path)
        assert config.key_bits == 128
        assert config.preset is Preset.RESET_PI
        assert config.T == "inf"
        assert config.n_prime == 40
        assert config.setpoint_mode is SetpointMode.REMOTE
        assert config.deadline_policy is DeadlinePolicy.HOLD

    def test_numeric_reset_period(self, loop_config_file):
        config = load_loop_config(loop_config_file(T=6))

        assert config.T == 6
        assert preset_from_config(config).design.T == 6

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_loop_config(tmp_path / "absent.conf")

    def test_unknown_key(self, loop_config_file):
        with pytest.raises(ConfigurationError):
            load_loop_config(loop_config_file(gain_margin=3))

    def test_bad_reset_period(self, loop_config_file):
        with pytest.raises(ConfigurationError):
            load_loop_config(loop_config_file(T=0))

    def test_addresses(self):
        config = LoopConfig(listen_addr="0.0.0.0:6000", peer_addr="plant.local:6001")

        assert config.listen_address == ("0.0.0.0", 6000)
        assert config.peer_address == ("plant.local", 6001)
        with pytest.raises(ValueError):
            parse_address("no-port")
        with pytest.raises(ValueError):
            parse_address("host:70000")


class TestLoopConfigValidator:

    def test_pendulum_at_256_bits(self, qube_loop):
        result = LoopConfigValidator.validate(qube_loop, 256)

        assert result["valid"]
        assert result["errors"] == []

    def test_narrow_ring_breaks_scale_budget(self):
        preset = build_preset(Preset.QUBE, n_prime=8)

        result = LoopConfigValidator.validate(preset, 256)
        assert not result["valid"]
        assert any(error.startswith("scale budget") for error in result["errors"])
        assert any(error.startswith("codec") for error in result["errors"])

    def test_headroom_at_64_bits(self, qube_loop):
        result = LoopConfigValidator.validate(qube_loop, 64)

        assert not result["valid"]
        assert any("plaintext headroom" in error for error in result["errors"])

        relaxed = LoopConfigValidator.validate(qube_loop, 64, check_headroom=False)
        assert relaxed["valid"]
        assert any("plaintext headroom" in warning for warning in relaxed["warnings"])

    def test_small_key_warning(self, static_loop):
        result = LoopConfigValidator.validate(static_loop, 64)

        assert result["valid"]
        assert any("testing only" in warning for warning in result["warnings"])

    def test_unsupported_key_size(self, static_loop):
        result = LoopConfigValidator.validate(static_loop, 63)

        assert not result["valid"]

    def test_cycle_without_reset(self):
        preset = build_preset(Preset.RESET_PI, T="inf")

        result = LoopConfigValidator.validate(preset, 256)
        assert not result["valid"]
        assert any("T=inf" in error for error in result["errors"])

    def test_validate_or_raise(self):
        with pytest.raises(ConfigurationError, match="scale budget"):
            LoopConfigValidator.validate_or_raise(build_preset(Preset.QUBE, n_prime=8), 256)
