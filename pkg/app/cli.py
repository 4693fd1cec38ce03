"""
bsa-sim: simulate, deduce, report and sweep from the command line.

    bsa-sim simulate --config run.json --out out/
    bsa-sim deduce out/ --out out/
    bsa-sim report out/ --trials 1000 --seed 7
    bsa-sim sweep --config beta_sweep.json

Exit codes: 0 success, 2 invalid configuration or input, 3 missing input files,
4 numerical degeneracy.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from app.errors import BsaError, InvalidConfigError, MissingInputError
from app.logging_config import setup_logging
from app.manifest_models import RunManifest
from app.record_io import (
    read_deduced,
    read_records,
    write_deduced,
    write_json,
    write_records,
    write_sweep,
)
from app.report_service import build_report, deduce_records, run_sweep, simulate_manifest

logger = logging.getLogger("bsa_sim")

EXIT_INVALID = 2


def _validation_details(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
    )


def _json_object(parent: dict, key: str, path: Path, prefix: str = "") -> dict:
    """parent[key] as a dict to apply overrides to; created when absent."""
    value = parent.setdefault(key, {})
    if not isinstance(value, dict):
        raise InvalidConfigError(f"{path}: {prefix}{key} must be a JSON object")
    return value


def load_manifest(path: Path, overrides: Optional[dict[str, Any]] = None) -> RunManifest:
    """Read a JSON manifest, apply command-line overrides, then validate."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise InvalidConfigError(f"{path}: manifest must be a JSON object")

    overrides = overrides or {}
    if any(overrides.get(key) is not None for key in ("mode", "pulses", "seed", "truncation")):
        experiment = _json_object(raw, "experiment", path)
        for key in ("mode", "pulses", "seed"):
            if overrides.get(key) is not None:
                experiment[key] = overrides[key]
        if overrides.get("truncation") is not None:
            detector = _json_object(experiment, "detector", path, prefix="experiment.")
            detector["truncation_total_photons"] = overrides["truncation"]
    if overrides.get("trials") is not None:
        raw["bootstrap_trials"] = overrides["trials"]
    if overrides.get("out") is not None:
        raw["output_dir"] = str(overrides["out"])

    try:
        return RunManifest.model_validate(raw)
    except ValidationError as exc:
        raise InvalidConfigError(f"{path}: {_validation_details(exc)}") from None


def cmd_simulate(manifest: RunManifest) -> list[Path]:
    records = simulate_manifest(manifest)
    return write_records(records, Path(manifest.output_dir))


def cmd_deduce(inputs: Sequence[Path], out_dir: Path) -> Path:
    rows = deduce_records(read_records(inputs))
    path = Path(out_dir) / "deduced.json"
    write_deduced(rows, path)
    return path


def cmd_report(inputs: Sequence[Path], out_dir: Path, trials: int = 0, seed: int = 0) -> Path:
    record_inputs = [Path(p) for p in inputs if Path(p).suffix != ".json"]
    deduced_rows = [row for p in inputs if Path(p).suffix == ".json" for row in read_deduced(Path(p))]
    records = read_records(record_inputs) if record_inputs else []
    report = build_report(records, trials=trials, seed=seed, deduced_rows=deduced_rows)
    path = Path(out_dir) / "report.json"
    write_json(report, path)
    return path


def cmd_sweep(manifest: RunManifest) -> Path:
    result = run_sweep(manifest)
    out_dir = Path(manifest.output_dir)
    path = out_dir / f"sweep_{result.axis}.csv"
    write_sweep(result, path)
    write_json(result, out_dir / f"sweep_{result.axis}.json")
    for column, value in result.visibility.items():
        logger.info("visibility of %s: %s", column, "n/a" if value is None else f"{value:.4f}")
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsa-sim", description=__doc__.splitlines()[1])
    sub = parser.add_subparsers(dest="command", required=True)

    def run_options(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, required=True, help="JSON run manifest")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--mode", choices=("exact", "sampled"))
        p.add_argument("--pulses", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--truncation", type=int, help="max total photons per sector")

    simulate = sub.add_parser("simulate", help="write count records for every configuration")
    run_options(simulate)

    deduce = sub.add_parser("deduce", help="deduce single-photon BSM tables from WCP records")
    deduce.add_argument("inputs", nargs="+", type=Path, help="record files or directories")
    deduce.add_argument("--out", type=Path, default=Path("."))

    report = sub.add_parser("report", help="QBER and C table per provenance")
    report.add_argument("inputs", nargs="+", type=Path, help="record files, directories or deduced.json")
    report.add_argument("--out", type=Path, default=Path("."))
    report.add_argument("--trials", type=int, default=0, help="bootstrap trials (sampled records only)")
    report.add_argument("--seed", type=int, default=0)

    sweep = sub.add_parser("sweep", help="QBER/C curves over beta or mu")
    run_options(sweep)
    sweep.add_argument("--trials", type=int, help="bootstrap trials per point")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging("INFO")
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("simulate", "sweep"):
            manifest = load_manifest(
                args.config,
                {
                    "mode": args.mode,
                    "pulses": args.pulses,
                    "seed": args.seed,
                    "truncation": args.truncation,
                    "trials": getattr(args, "trials", None),
                    "out": args.out,
                },
            )
            if args.command == "simulate":
                cmd_simulate(manifest)
            else:
                cmd_sweep(manifest)
        elif args.command == "deduce":
            cmd_deduce(args.inputs, args.out)
        else:
            if args.trials < 0 or args.trials == 1:
                raise InvalidConfigError("--trials must be 0 (off) or at least 2")
            cmd_report(args.inputs, args.out, trials=args.trials, seed=args.seed)
    except BsaError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("invalid input: %s", _validation_details(exc))
        return EXIT_INVALID
    except OSError as exc:
        logger.error("cannot write output: %s", exc)
        return EXIT_INVALID
    return 0


if __name__ == "__main__":
    sys.exit(main())
