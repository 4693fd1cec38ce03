"""
File formats.

Count records are flat `key=value` text files, one per configuration:

    config_tag=both
    mode=exact
    basis_a=X
    bit_a=0
    ...
    d12=1.5807e-05
    s1=0.0039

Pair keys are d12..d34, singles s1..s4; angles in radians; mu_a/mu_b are
post-loss values and mu_a_source/mu_b_source the configured ones. Floats are
written with repr() so they read back bit-for-bit; sampled counts as integers.
Deduced tables and reports are JSON, sweeps CSV. All writes are atomic.
"""
import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from pydantic import BaseModel, ValidationError

from app.errors import MissingInputError, RecordParseError
from app.experiment_models import CountRecord, RunMode
from app.optics_models import ALL_PAIRS, DETECTORS, pair_label
from app.qkd_models import DeducedRow, SweepResult

logger = logging.getLogger(__name__)

RECORD_SUFFIX = ".rec"

_HEADER_KEYS = (
    "config_tag", "mode", "basis_a", "bit_a", "basis_b", "bit_b", "beta",
    "source_a", "source_b", "mu_a", "mu_b", "mu_a_source", "mu_b_source",
    "pulses", "truncated_mass",
)
_PAIR_KEYS = {f"d{i}{j}": pair_label(i, j) for i, j in ALL_PAIRS}
_SINGLE_KEYS = {f"s{d}": d for d in DETECTORS}
RECORD_KEYS = (*_HEADER_KEYS, *_PAIR_KEYS, *_SINGLE_KEYS)


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def _format_value(value: float, integral: bool) -> str:
    if integral:
        return str(int(value))
    return repr(float(value))


def serialize_record(record: CountRecord) -> str:
    integral = record.mode == RunMode.SAMPLED
    fields = {
        "config_tag": record.config_tag.value,
        "mode": record.mode.value,
        "basis_a": record.setting_a.basis.value,
        "bit_a": str(record.setting_a.bit),
        "basis_b": record.setting_b.basis.value,
        "bit_b": str(record.setting_b.bit),
        "beta": repr(float(record.beta)),
        "source_a": record.source_a.value,
        "source_b": record.source_b.value,
        "mu_a": repr(float(record.mu_a)),
        "mu_b": repr(float(record.mu_b)),
        "mu_a_source": repr(float(record.mu_a_source)),
        "mu_b_source": repr(float(record.mu_b_source)),
        "pulses": str(record.pulses),
        "truncated_mass": repr(float(record.truncated_mass)),
    }
    for key, label in _PAIR_KEYS.items():
        fields[key] = _format_value(record.coincidences[label], integral)
    for key, detector in _SINGLE_KEYS.items():
        fields[key] = _format_value(record.singles[detector], integral)
    return "".join(f"{key}={fields[key]}\n" for key in RECORD_KEYS)


def parse_record(text: str, source: str = "<record>") -> CountRecord:
    """Parse one flat record; errors carry the byte offset of the offending line."""
    values: dict[str, tuple[str, int]] = {}
    offset = 0
    for line in text.splitlines(keepends=True):
        line_offset = offset
        offset += len(line.encode("utf-8"))
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep:
            raise RecordParseError(f"{source}: byte {line_offset}: expected key=value, got {stripped!r}")
        if key not in RECORD_KEYS:
            raise RecordParseError(f"{source}: byte {line_offset}: unknown key {key!r}")
        if key in values:
            raise RecordParseError(f"{source}: byte {line_offset}: duplicate key {key!r}")
        values[key] = (value.strip(), line_offset)

    missing = [key for key in RECORD_KEYS if key not in values and key != "truncated_mass"]
    if missing:
        raise RecordParseError(f"{source}: byte {offset}: missing keys {', '.join(missing)}")

    def number(key: str) -> float:
        raw, at = values[key]
        try:
            return float(raw)
        except ValueError:
            raise RecordParseError(f"{source}: byte {at}: {key} is not a number: {raw!r}") from None

    def integer(key: str) -> int:
        raw, at = values[key]
        try:
            return int(raw)
        except ValueError:
            raise RecordParseError(f"{source}: byte {at}: {key} is not an integer: {raw!r}") from None

    try:
        return CountRecord(
            config_tag=values["config_tag"][0],
            mode=values["mode"][0],
            setting_a={"basis": values["basis_a"][0], "bit": integer("bit_a")},
            setting_b={"basis": values["basis_b"][0], "bit": integer("bit_b")},
            beta=number("beta"),
            source_a=values["source_a"][0],
            source_b=values["source_b"][0],
            mu_a=number("mu_a"),
            mu_b=number("mu_b"),
            mu_a_source=number("mu_a_source"),
            mu_b_source=number("mu_b_source"),
            pulses=integer("pulses"),
            truncated_mass=number("truncated_mass") if "truncated_mass" in values else 0.0,
            coincidences={label: number(key) for key, label in _PAIR_KEYS.items()},
            singles={detector: number(key) for key, detector in _SINGLE_KEYS.items()},
        )
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise RecordParseError(f"{source}: byte 0: invalid record ({problems})") from None


def record_filename(record: CountRecord, index: int) -> str:
    return (
        f"{index:03d}_{record.source_a.value}-{record.source_b.value}_"
        f"{record.setting_a}{record.setting_b}_{record.config_tag.value}{RECORD_SUFFIX}"
    )


def write_records(records: Sequence[CountRecord], out_dir: Path) -> list[Path]:
    paths = []
    for index, record in enumerate(records):
        path = Path(out_dir) / record_filename(record, index)
        write_atomic(path, serialize_record(record))
        paths.append(path)
    logger.info("wrote %d record files to %s", len(paths), out_dir)
    return paths


def _record_paths(inputs: Iterable[Path]) -> list[Path]:
    paths = []
    for item in inputs:
        item = Path(item)
        if item.is_dir():
            paths.extend(sorted(item.glob(f"*{RECORD_SUFFIX}")))
        elif item.is_file():
            paths.append(item)
        else:
            raise MissingInputError(f"input not found: {item}")
    if not paths:
        raise MissingInputError("no record files found in the given inputs")
    return paths


def read_records(inputs: Iterable[Path]) -> list[CountRecord]:
    """Read record files; directories contribute every *.rec file they hold."""
    records = []
    for path in _record_paths(inputs):
        try:
            text = path.read_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RecordParseError(f"{path}: byte {exc.start}: not valid UTF-8") from None
        records.append(parse_record(text, source=str(path)))
    return records


def write_json(model: BaseModel, path: Path) -> None:
    write_atomic(path, model.model_dump_json(indent=2) + "\n")
    logger.info("wrote %s", path)


def write_deduced(rows: Sequence[DeducedRow], path: Path) -> None:
    payload = [row.model_dump(mode="json") for row in rows]
    write_atomic(path, json.dumps(payload, indent=2) + "\n")
    logger.info("wrote %d deduced rows to %s", len(rows), path)


def read_deduced(path: Path) -> list[DeducedRow]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"input not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        return [DeducedRow.model_validate(item) for item in payload]
    except json.JSONDecodeError as exc:
        raise RecordParseError(f"{path}: byte {exc.pos}: {exc.msg}") from None
    except (ValidationError, TypeError) as exc:
        raise RecordParseError(f"{path}: byte 0: invalid deduced table ({exc})") from None


def _csv_cell(value) -> str:
    return "" if value is None else repr(float(value))


def sweep_csv(result: SweepResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([result.axis, *result.columns])
    for row in result.rows:
        writer.writerow([repr(float(row.axis_value)), *(_csv_cell(row.values.get(c)) for c in result.columns)])
    return buffer.getvalue()


def write_sweep(result: SweepResult, path: Path) -> None:
    write_atomic(path, sweep_csv(result))
    logger.info("wrote %d sweep rows to %s", len(result.rows), path)


def read_sweep(path: Path, scenario: str = "") -> SweepResult:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"input not found: {path}")
    reader = csv.reader(io.StringIO(path.read_text(encoding="utf-8")))
    try:
        header = next(reader)
    except StopIteration:
        raise RecordParseError(f"{path}: byte 0: empty sweep file") from None
    axis, columns = header[0], header[1:]
    rows = []
    for cells in reader:
        if not cells:
            continue
        try:
            values = {c: (float(v) if v else None) for c, v in zip(columns, cells[1:])}
            rows.append({"axis_value": float(cells[0]), "values": values})
        except ValueError as exc:
            raise RecordParseError(f"{path}: row {len(rows) + 1}: {exc}") from None
    return SweepResult(scenario=scenario, axis=axis, columns=columns, rows=rows)
