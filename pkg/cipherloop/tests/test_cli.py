import csv
import json
import stat

import pytest

from cipherloop.main import EXIT_INVALID, EXIT_OK, build_parser, main
from cipherloop.schemas.controller import PublicControllerParams
from cipherloop.schemas.timing import TimingSummary
from cipherloop.services.controller_service import build_controller_spec
from cipherloop.services.key_store import save_keypair
from cipherloop.services.presets import static_preset


@pytest.fixture
def key_file(tmp_path, keys_64):
    _, key = save_keypair(tmp_path / "keys" / "loop", *keys_64)
    return key


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestKeygenCommand:

    def test_writes_key_files(self, tmp_path):
        prefix = tmp_path / "fresh"

        assert main(["keygen", "--bits", "64", "--out", str(prefix)]) == EXIT_OK
        key = tmp_path / "fresh.key"
        assert (tmp_path / "fresh.pub").is_file()
        assert stat.S_IMODE(key.stat().st_mode) == 0o600

    def test_unsupported_size(self, tmp_path):
        assert main(["keygen", "--bits", "63", "--out", str(tmp_path / "k")]) == EXIT_INVALID


class TestRunCommand:

    def test_invalid_ring_rejected_before_keygen(self, tmp_path):
        code = main(
            ["run", "--preset", "qube", "--n-prime", "8", "--key-bits", "256", "--steps", "1"]
        )
        assert code == EXIT_INVALID

    def test_zero_steps_writes_header_only(self, tmp_path):
        out = tmp_path / "empty.csv"

        code = main(
            ["run", "--preset", "static", "--key-bits", "64", "--steps", "0", "--out", str(out)]
        )
        assert code == EXIT_OK
        assert len(read_csv(out)) == 1

    def test_encrypted_run_with_key_file(self, tmp_path, key_file):
        out = tmp_path / "run.csv"

        code = main(
            ["run", "--preset", "static", "--key", str(key_file), "--steps", "20", "--out", str(out)]
        )
        rows = read_csv(out)
        assert code == EXIT_OK
        assert rows[0][:4] == ["step", "time_s", "y", "u"]
        assert len(rows) == 21

    def test_plain_integer_mode(self):
        assert main(["run", "--preset", "static", "--mode", "plain_int", "--steps", "10"]) == EXIT_OK

    def test_metrics_file(self, tmp_path):
        out = tmp_path / "metrics" / "run.prom"

        code = main(
            ["run", "--preset", "static", "--mode", "plain_int", "--steps", "10", "--metrics-out", str(out)]
        )
        assert code == EXIT_OK
        assert 'cipherloop_steps_total{role="in_process"} 10.0' in out.read_text()

    @pytest.mark.integration
    def test_networked_loopback(self, key_file):
        code = main(
            [
                "run", "--preset", "static", "--key", str(key_file), "--steps", "10",
                "--networked", "--deadline-policy", "wait",
            ]
        )
        assert code == EXIT_OK

    def test_bad_reset_period(self):
        assert main(["run", "--preset", "static", "--T", "0", "--steps", "1"]) == EXIT_INVALID

    def test_config_file(self, loop_config_file, key_file):
        path = loop_config_file(preset="static", steps=5, seed=3)

        assert main(["run", "--config", str(path), "--key", str(key_file)]) == EXIT_OK

    def test_broken_config_file(self, loop_config_file):
        path = loop_config_file(preset="segway")

        assert main(["run", "--config", str(path)]) == EXIT_INVALID


class TestOtherCommands:

    def test_selftest_subset(self):
        code = main(["selftest", "--only", "twos_complement_12", "--only", "mont_mult_tiny_exhaustive"])

        assert code == EXIT_OK

    def test_export_public_material(self, tmp_path, key_file):
        prefix = tmp_path / "controller"

        assert main(["export", "--preset", "static", "--key", str(key_file), "--out", str(prefix)]) == EXIT_OK
        exported = PublicControllerParams.model_validate(
            json.loads((tmp_path / "controller.controller.json").read_text())
        )
        assert exported.to_spec() == build_controller_spec(static_preset().design)
        assert exported.setpoint_residues == [16]
        assert "lambda" not in (tmp_path / "controller.pub").read_text()

    def test_bench_table(self, tmp_path):
        out = tmp_path / "timing.csv"

        assert main(["bench", "--bits", "64", "--reps", "5", "--seed", "1", "--out", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert rows[0] == list(TimingSummary.model_fields)
        assert len(rows) == 2

    def test_bench_reads_config_file(self, tmp_path, loop_config_file):
        path = loop_config_file(preset="static", seed=2, noise_std=0.05)
        out = tmp_path / "timing.csv"

        code = main(["bench", "--config", str(path), "--bits", "64", "--reps", "5", "--out", str(out)])
        assert code == EXIT_OK
        assert len(read_csv(out)) == 2

    def test_bench_rejects_broken_config(self, loop_config_file):
        path = loop_config_file(preset="segway")

        assert main(["bench", "--config", str(path), "--bits", "64", "--reps", "5"]) == EXIT_INVALID

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["fly"])
