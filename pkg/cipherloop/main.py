import argparse
import asyncio
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from rich.console import Console
from rich.table import Table

from cipherloop.config import load_loop_config, settings
from cipherloop.core.config_validator import LoopConfigValidator
from cipherloop.core.exceptions import CipherloopError, ConfigurationError, ParameterError
from cipherloop.core.logging import configure_logging
from cipherloop.models.enums import (
    Command,
    DeadlinePolicy,
    LoopMode,
    Preset,
    SetpointMode,
)
from cipherloop.models.keys import PublicKey
from cipherloop.models.plant import LoopPreset
from cipherloop.schemas.config import LoopConfig, parse_address
from cipherloop.schemas.controller import PublicControllerParams
from cipherloop.schemas.timing import LoopSummary, TimingSummary
from cipherloop.schemas.wire import SessionParams
from cipherloop.services.benchmark_service import (
    bench_keypair,
    format_us,
    measure_key_length,
    measure_min_period,
)
from cipherloop.services.controller_endpoint import ControllerEndpoint
from cipherloop.services.controller_service import build_controller_spec, encode_signals
from cipherloop.services.key_store import (
    load_private_key,
    load_public_key,
    public_path,
    save_keypair,
    save_public_key,
)
from cipherloop.services.loop_service import run_closed_loop, write_timing_csv, write_trajectory_csv
from cipherloop.services.loopback_service import run_loopback_session
from cipherloop.services.paillier_service import keygen
from cipherloop.services.plant_interface import PlantInterfaceService
from cipherloop.services.presets import preset_from_config
from cipherloop.services.selftest_service import CHECKS, run_selftest

logger = logging.getLogger(__name__)

console = Console()

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAULT = 2


def _bits_list(value: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Expected comma-separated key sizes, got {value!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cipherloop",
        description="Encrypted linear feedback control over Paillier ciphertexts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    keygen_cmd = sub.add_parser(Command.KEYGEN.value, help="Generate a key pair")
    keygen_cmd.add_argument("--bits", type=int, default=settings.DEFAULT_KEY_BITS)
    keygen_cmd.add_argument("--out", default="keys/cipherloop", help="Path prefix for .pub/.key")

    selftest_cmd = sub.add_parser(Command.SELFTEST.value, help="Run arithmetic self-tests")
    selftest_cmd.add_argument("--only", action="append", choices=sorted(CHECKS), default=None)
    selftest_cmd.add_argument("--seed", type=int, default=None)

    run_cmd = sub.add_parser(Command.RUN.value, help="Run a closed loop")
    _add_loop_arguments(run_cmd)
    run_cmd.add_argument("--key", help="Private key file; a fresh key is generated when omitted")
    run_cmd.add_argument("--mode", choices=[m.value for m in LoopMode], default=LoopMode.ENCRYPTED.value)
    run_cmd.add_argument("--networked", action="store_true", help="Run both services over loopback")
    run_cmd.add_argument("--inline-randomizer", action="store_true")
    run_cmd.add_argument("--skip-zero-gains", action="store_true")
    run_cmd.add_argument("--out", help="Trajectory CSV path")
    run_cmd.add_argument("--metrics-out", dest="metrics_out", help="Write the session metrics in Prometheus text format")

    plant_cmd = sub.add_parser(Command.SERVE_PLANT.value, help="Run the plant interface")
    _add_loop_arguments(plant_cmd)
    plant_cmd.add_argument("--key", required=True, help="Private key file")
    plant_cmd.add_argument("--out", help="Trajectory CSV path")
    plant_cmd.add_argument("--metrics-out", dest="metrics_out", help="Write the session metrics in Prometheus text format")

    controller_cmd = sub.add_parser(Command.SERVE_CONTROLLER.value, help="Run the controller")
    _add_loop_arguments(controller_cmd)
    controller_cmd.add_argument("--key", required=True, help="Public key file")
    controller_cmd.add_argument("--params", help="Controller parameters written by 'export'")
    controller_cmd.add_argument("--sessions", type=int, default=None)
    controller_cmd.add_argument("--drop-steps", type=_bits_list, default=[])

    bench_cmd = sub.add_parser(Command.BENCH.value, help="Measure the minimum sampling period")
    bench_cmd.add_argument("--bits", type=_bits_list, default=[64, 128, 256, 512])
    bench_cmd.add_argument("--reps", type=int, default=300)
    bench_cmd.add_argument("--config", help="Loop configuration file")
    bench_cmd.add_argument("--preset", choices=[p.value for p in Preset])
    bench_cmd.add_argument("--noise-std", dest="noise_std", type=float, help="Sensor noise std, seeded by --seed")
    bench_cmd.add_argument("--compare-inline", action="store_true")
    bench_cmd.add_argument("--seed", type=int, default=None)
    bench_cmd.add_argument("--out", help="Timing CSV path")

    export_cmd = sub.add_parser(Command.EXPORT.value, help="Export public material for the controller host")
    _add_loop_arguments(export_cmd)
    export_cmd.add_argument("--key", required=True, help="Private key file")
    export_cmd.add_argument("--out", required=True, help="Path prefix for .pub and .controller.json")

    return parser


def _add_loop_arguments(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--config", help="Loop configuration file")
    cmd.add_argument("--preset", choices=[p.value for p in Preset])
    cmd.add_argument("--steps", type=int)
    cmd.add_argument("--seed", type=int)
    cmd.add_argument("--noise-std", dest="noise_std", type=float, help="Sensor noise std, seeded by --seed")
    cmd.add_argument("--key-bits", dest="key_bits", type=int)
    cmd.add_argument("--n-prime", dest="n_prime", type=int)
    cmd.add_argument("--m", type=int)
    cmd.add_argument("--T", dest="T")
    cmd.add_argument("--setpoint-mode", dest="setpoint_mode", choices=[s.value for s in SetpointMode])
    cmd.add_argument("--deadline-policy", dest="deadline_policy", choices=[d.value for d in DeadlinePolicy])


def resolve_config(args: argparse.Namespace) -> LoopConfig:
    base = (
        load_loop_config(args.config)
        if args.config
        else LoopConfig(
            key_bits=settings.DEFAULT_KEY_BITS,
            sample_period_us=settings.DEFAULT_SAMPLE_PERIOD_US,
        )
    )
    overrides = {
        name: getattr(args, name)
        for name in (
            "preset", "steps", "seed", "noise_std", "key_bits", "n_prime", "m", "T",
            "setpoint_mode", "deadline_policy",
        )
        if getattr(args, name, None) is not None
    }
    config = base
    if overrides:
        try:
            config = LoopConfig.model_validate({**base.model_dump(), **overrides})
        except ValueError as e:
            raise ConfigurationError(f"Invalid command-line override: {e}") from e

    if config.log_path:
        configure_logging(settings.log_level, settings.LOG_FORMAT, config.log_path)
    return config


def _print_validation(preset_name: str, errors: Sequence[str]) -> None:
    console.print(f"[red]❌ Configuration of preset '{preset_name}' is invalid:[/red]")
    for error in errors:
        console.print(f"  {error}")


def _validated_preset(config: LoopConfig, key_bits: int) -> LoopPreset:
    preset = preset_from_config(config)
    result = LoopConfigValidator.validate(preset, key_bits)
    for warning in result["warnings"]:
        console.print(f"[yellow]⚠️  {warning}[/yellow]")
    if not result["valid"]:
        _print_validation(preset.name, result["errors"])
        raise ConfigurationError("; ".join(result["errors"]))
    return preset


def _print_summary(summary: LoopSummary) -> None:
    table = Table(title=f"Run summary: {summary.preset}")
    table.add_column("Field")
    table.add_column("Value", justify="right")
    rows: list[tuple[str, object]] = [
        ("mode", summary.mode + (" (networked)" if summary.networked else "")),
        ("steps", summary.steps),
        ("key bits", summary.key_bits or "-"),
        ("equivalence", summary.equivalence),
        ("overflow steps", summary.overflow_steps),
        ("saturated signals", summary.saturated_signals),
        ("missed deadlines", summary.missed_deadlines),
        ("held inputs", summary.held_inputs),
        ("discarded frames", summary.discarded_frames),
        ("worst step", format_us(summary.worst_total_us)),
    ]
    if summary.timing is not None:
        rows += [
            ("median step", format_us(summary.timing.median_us)),
            ("p99 step", format_us(summary.timing.p99_us)),
        ]
    for name, value in rows:
        table.add_row(name, str(value))
    console.print(table)


def _write_metrics(path: str | None, metrics: str) -> None:
    if not path:
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(metrics, encoding="utf-8")
    console.print(f"📄 Metrics written to {target}")


def _print_key(pk: PublicKey, paths: Sequence[Path]) -> None:
    ctx = pk.ctx_n2
    table = Table(title="Key parameters")
    table.add_column("Parameter")
    table.add_column("Value", justify="right")
    table.add_row("key bits", str(pk.key_bits))
    table.add_row("words w", str(ctx.word_count))
    table.add_row("radix R", f"2^{ctx.radix_exp}")
    table.add_row("ciphertext bytes", str(pk.ciphertext_bytes))
    table.add_row("M' of N^2", str(ctx.m_prime))
    table.add_row("fingerprint", pk.fingerprint)
    for path in paths:
        table.add_row("file", str(path))
    console.print(table)


def _print_bench(summaries: Sequence[TimingSummary]) -> None:
    table = Table(title="Minimum sampling period")
    for column in ("key bits", "w", "randomizer", "median", "p99", "min period", "p99/median"):
        table.add_column(column, justify="right")
    for s in summaries:
        table.add_row(
            str(s.key_bits),
            str(s.word_count),
            "overlapped" if s.overlap_randomizer else "inline",
            format_us(s.median_us),
            format_us(s.p99_us),
            format_us(s.min_period_us),
            f"{s.jitter_ratio:.2f}",
        )
    console.print(table)


def cmd_keygen(args: argparse.Namespace) -> int:
    pk, sk = keygen(args.bits)
    paths = save_keypair(args.out, pk, sk)
    _print_key(pk, paths)
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    report = run_selftest(args.only, seed=args.seed or 0)
    table = Table(title="Self-test")
    table.add_column("Check")
    table.add_column("Result")
    table.add_column("Time", justify="right")
    for check in report.checks:
        result = "[green]pass[/green]" if check.passed else f"[red]FAIL[/red] {check.detail}"
        table.add_row(check.name, result, f"{check.duration_s:.2f}s")
    console.print(table)
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    mode = LoopMode(args.mode)

    pk = sk = None
    if mode is LoopMode.ENCRYPTED and args.key:
        pk, sk = load_private_key(args.key)
    key_bits = pk.key_bits if pk is not None else config.key_bits
    preset = _validated_preset(config, key_bits)
    if mode is LoopMode.ENCRYPTED and pk is None:
        logger.warning(f"No key file given, generating a {key_bits}-bit key for this run")
        pk, sk = keygen(key_bits)

    if args.networked:
        if pk is None or sk is None:
            raise ConfigurationError("--networked needs the encrypted mode")
        result = asyncio.run(
            run_loopback_session(
                preset,
                pk,
                sk,
                config.steps,
                seed=config.seed,
                setpoint_mode=config.setpoint_mode,
                deadline_policy=config.deadline_policy,
                overlap_randomizer=not args.inline_randomizer,
            )
        )
    else:
        result = run_closed_loop(
            preset,
            mode,
            steps=config.steps,
            pk=pk,
            sk=sk,
            seed=config.seed,
            setpoint_mode=config.setpoint_mode,
            overlap_randomizer=not args.inline_randomizer,
            skip_zero_gains=args.skip_zero_gains or None,
        )

    if args.out:
        path = write_trajectory_csv(args.out, preset, result.rows)
        console.print(f"📄 Trajectory written to {path}")
    _write_metrics(args.metrics_out, result.metrics)
    _print_summary(result.summary)
    return EXIT_FAULT if result.summary.equivalence == "mismatch" else EXIT_OK


def cmd_serve_plant(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    pk, sk = load_private_key(args.key)
    preset = _validated_preset(config, pk.key_bits)
    host, port = parse_address(config.peer_addr)

    service = PlantInterfaceService(
        preset,
        pk,
        sk,
        seed=config.seed,
        setpoint_mode=config.setpoint_mode,
        deadline_policy=config.deadline_policy,
    )
    result = asyncio.run(service.run(host, port, config.steps))
    if args.out:
        write_trajectory_csv(args.out, preset, result.rows)
    _write_metrics(args.metrics_out, result.metrics)
    _print_summary(result.summary)
    return EXIT_FAULT if result.summary.equivalence == "mismatch" else EXIT_OK


def cmd_serve_controller(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    pk = load_public_key(args.key)

    if args.params:
        try:
            exported = PublicControllerParams.model_validate_json(Path(args.params).read_text())
        except ValueError as e:
            raise ConfigurationError(f"Invalid controller parameters {args.params}: {e}") from e
        spec = exported.to_spec()
        residues = exported.setpoint_residues
    else:
        preset = _validated_preset(config, pk.key_bits)
        spec = build_controller_spec(preset.design)
        residues, _ = encode_signals(spec, preset.setpoint)

    params = SessionParams.for_session(spec, pk, config.sample_period_us, config.setpoint_mode)
    endpoint = ControllerEndpoint(
        spec, pk, params, setpoint_residues=residues, drop_steps=args.drop_steps
    )
    host, port = parse_address(config.listen_addr)
    console.print(f"🚀 Controller for '{spec.name}' listening on {host}:{port}")
    asyncio.run(endpoint.serve(host, port, args.sessions))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.config is None and args.preset is None:
        args.preset = Preset.STATIC.value
    config = resolve_config(args)
    preset = preset_from_config(config)
    seed = config.seed
    keys = {bits: bench_keypair(bits, seed) for bits in args.bits}

    summaries = measure_min_period(args.bits, preset, args.reps, seed=seed, keys=keys)
    if args.compare_inline:
        summaries += [
            measure_key_length(preset, keys[bits], args.reps, seed=seed, overlap_randomizer=False)
            for bits in sorted(args.bits)
        ]

    if args.out:
        path = write_timing_csv(args.out, summaries)
        console.print(f"📄 Timing table written to {path}")
    _print_bench(summaries)
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    pk, _ = load_private_key(args.key)
    preset = _validated_preset(config, pk.key_bits)
    spec = build_controller_spec(preset.design)
    residues, _ = encode_signals(spec, preset.setpoint)

    pub = save_public_key(public_path(args.out), pk)
    params_path = Path(f"{args.out}.controller.json")
    exported = PublicControllerParams.from_spec(
        spec, residues if config.setpoint_mode is SetpointMode.LOCAL else None
    )
    params_path.write_text(json.dumps(exported.model_dump(), indent=2), encoding="utf-8")

    console.print(f"📄 Public key written to {pub}")
    console.print(f"📄 Controller parameters written to {params_path}")
    return EXIT_OK


HANDLERS = {
    Command.KEYGEN: cmd_keygen,
    Command.SELFTEST: cmd_selftest,
    Command.RUN: cmd_run,
    Command.SERVE_PLANT: cmd_serve_plant,
    Command.SERVE_CONTROLLER: cmd_serve_controller,
    Command.BENCH: cmd_bench,
    Command.EXPORT: cmd_export,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(settings.log_level, settings.LOG_FORMAT)

    try:
        return HANDLERS[Command(args.command)](args)
    except (ConfigurationError, ParameterError) as e:
        console.print(f"[red]❌ {e}[/red]")
        return EXIT_INVALID
    except (CipherloopError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"[red]💥 {e}[/red]")
        return EXIT_FAULT
    except KeyboardInterrupt:
        console.print("🛑 Interrupted")
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
