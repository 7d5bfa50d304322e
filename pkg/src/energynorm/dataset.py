"""Hardware, energy-record and measurement-table types plus CSV/JSON I/O.

Energies are stored in kWh. Files may declare another unit (``wh`` or ``j``)
and are converted on read.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

RECORD_COLUMNS = ["model_id", "hardware_id", "gpu_energy_kwh", "epochs", "batch_size", "flops_forward", "params"]
HARDWARE_COLUMNS = ["id", "name", "tdp_watts", "memory_gib"]

UNIT_TO_KWH = {"kwh": 1.0, "wh": 1e-3, "j": 1.0 / 3.6e6}


class DataError(ValueError):
    """Base class for dataset problems (exit code 2 at the CLI)."""


class ParseError(DataError):
    pass


class ValidationError(DataError):
    pass


class DuplicateKeyError(DataError):
    pass


class DanglingReferenceError(ValidationError):
    pass


@dataclass(frozen=True)
class HardwareSpec:
    id: str
    name: str
    tdp_watts: float
    memory_gib: float

    def __post_init__(self):
        if not self.id:
            raise ValidationError("hardware id must be non-empty")
        if not self.tdp_watts > 0:
            raise ValidationError(f"hardware {self.id!r}: tdp_watts must be > 0")
        if not self.memory_gib > 0:
            raise ValidationError(f"hardware {self.id!r}: memory_gib must be > 0")

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "tdp_watts": self.tdp_watts, "memory_gib": self.memory_gib}


@dataclass(frozen=True)
class EnergyRecord:
    model_id: str
    hardware_id: str
    gpu_energy_kwh: float
    epochs: int = 10
    batch_size: int = 8
    flops_forward: Optional[int] = None
    params: Optional[int] = None

    def __post_init__(self):
        if not self.model_id or not self.hardware_id:
            raise ValidationError("model_id and hardware_id must be non-empty")
        if not (math.isfinite(self.gpu_energy_kwh) and self.gpu_energy_kwh > 0):
            raise ValidationError(
                f"record ({self.model_id}, {self.hardware_id}): gpu_energy_kwh must be > 0, "
                f"got {self.gpu_energy_kwh}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError(f"record ({self.model_id}, {self.hardware_id}): epochs and batch_size must be >= 1")
        for name in ("flops_forward", "params"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValidationError(f"record ({self.model_id}, {self.hardware_id}): {name} must be >= 0")

    @property
    def key(self) -> tuple[str, str]:
        return self.model_id, self.hardware_id

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "hardware_id": self.hardware_id,
            "gpu_energy_kwh": self.gpu_energy_kwh,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "flops_forward": self.flops_forward,
            "params": self.params,
        }


@dataclass(frozen=True)
class PairData:
    """Models measured on both hardware of a pair, aligned by model_id.

    ``flops`` and ``params`` hold NaN where a record lacks the value.
    ``omitted`` lists (model_id, hardware_id) for models found on one side only.
    """

    source: str
    target: str
    model_ids: tuple[str, ...]
    e_source: np.ndarray
    e_target: np.ndarray
    flops: np.ndarray
    params: np.ndarray
    omitted: tuple[tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.model_ids)

    def subset(self, indices: Iterable[int]) -> "PairData":
        idx = np.asarray(sorted(int(i) for i in indices), dtype=int)
        return PairData(
            source=self.source,
            target=self.target,
            model_ids=tuple(self.model_ids[i] for i in idx),
            e_source=self.e_source[idx],
            e_target=self.e_target[idx],
            flops=self.flops[idx],
            params=self.params[idx],
        )


@dataclass(frozen=True)
class MeasurementTable:
    hardware: tuple[HardwareSpec, ...]
    records: tuple[EnergyRecord, ...]
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        hw = tuple(sorted(self.hardware, key=lambda h: h.id))
        recs = tuple(sorted(self.records, key=lambda r: (r.model_id, r.hardware_id)))
        ids = [h.id for h in hw]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise DuplicateKeyError(f"duplicate hardware id {dup!r}")
        known = set(ids)
        index = {}
        for r in recs:
            if r.hardware_id not in known:
                raise DanglingReferenceError(
                    f"record for model {r.model_id!r} references unknown hardware_id {r.hardware_id!r}")
            if r.key in index:
                raise DuplicateKeyError(f"duplicate record key (model_id={r.model_id!r}, hardware_id={r.hardware_id!r})")
            index[r.key] = r
        object.__setattr__(self, "hardware", hw)
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "_index", index)

    def __eq__(self, other):
        if not isinstance(other, MeasurementTable):
            return NotImplemented
        return self.hardware == other.hardware and self.records == other.records

    @property
    def hardware_ids(self) -> list[str]:
        return [h.id for h in self.hardware]

    @property
    def model_ids(self) -> list[str]:
        return sorted({r.model_id for r in self.records})

    def models_on(self, hardware_id: str) -> set[str]:
        return {r.model_id for r in self.records if r.hardware_id == hardware_id}

    def get(self, model_id: str, hardware_id: str) -> Optional[EnergyRecord]:
        return self._index.get((model_id, hardware_id))

    def to_dict(self) -> dict:
        return {
            "hardware": [h.to_dict() for h in self.hardware],
            "records": [r.to_dict() for r in self.records],
        }


def pivot_pair(table: MeasurementTable, source: str, target: str, allow_identity: bool = False) -> PairData:
    known = set(table.hardware_ids)
    for hid in (source, target):
        if hid not in known:
            raise ValidationError(f"unknown hardware_id {hid!r}; known: {sorted(known)}")
    if source == target and not allow_identity:
        raise ValidationError(f"source and target are both {source!r}")
    on_src, on_tgt = table.models_on(source), table.models_on(target)
    common = sorted(on_src & on_tgt)
    if not common:
        raise ValidationError(f"no model is measured on both {source!r} and {target!r}")
    omitted = tuple(sorted([(m, source) for m in on_src - on_tgt] + [(m, target) for m in on_tgt - on_src]))

    src = [table.get(m, source) for m in common]
    tgt = [table.get(m, target) for m in common]

    def feature(name):
        # cost features describe the model, so either side may supply them
        out = []
        for s, t in zip(src, tgt):
            value = getattr(s, name)
            if value is None:
                value = getattr(t, name)
            out.append(np.nan if value is None else float(value))
        return np.array(out)

    return PairData(
        source=source,
        target=target,
        model_ids=tuple(common),
        e_source=np.array([r.gpu_energy_kwh for r in src]),
        e_target=np.array([r.gpu_energy_kwh for r in tgt]),
        flops=feature("flops_forward"),
        params=feature("params"),
        omitted=omitted,
    )


# ---------------------------------------------------------------- parsing


def _unit_factor(unit: Optional[str], where: str) -> float:
    if unit is None:
        return 1.0
    key = unit.strip().lower()
    if key not in UNIT_TO_KWH:
        raise ParseError(f"{where}: unknown energy unit {unit!r} (expected one of {sorted(UNIT_TO_KWH)})")
    return UNIT_TO_KWH[key]


def _opt_int(value, where: str) -> Optional[int]:
    if value is None or (isinstance(value, str) and value.strip() == ""):
        return None
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: expected an integer, got {value!r}") from None
    if not f.is_integer():
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    return int(f)


def _record_from_fields(row: dict, factor: float, where: str) -> EnergyRecord:
    try:
        energy = float(row["gpu_energy_kwh"]) * factor
        epochs = _opt_int(row.get("epochs"), where)
        batch = _opt_int(row.get("batch_size"), where)
        return EnergyRecord(
            model_id=str(row["model_id"]).strip(),
            hardware_id=str(row["hardware_id"]).strip(),
            gpu_energy_kwh=energy,
            epochs=10 if epochs is None else epochs,
            batch_size=8 if batch is None else batch,
            flops_forward=_opt_int(row.get("flops_forward"), where),
            params=_opt_int(row.get("params"), where),
        )
    except KeyError as exc:
        raise ParseError(f"{where}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise type(exc)(f"{where}: {exc}") from None
        raise ParseError(f"{where}: {exc}") from None


def _hardware_from_fields(row: dict, where: str) -> HardwareSpec:
    try:
        return HardwareSpec(
            id=str(row["id"]).strip(),
            name=str(row.get("name") or row["id"]),
            tdp_watts=float(row["tdp_watts"]),
            memory_gib=float(row["memory_gib"]),
        )
    except KeyError as exc:
        raise ParseError(f"{where}: missing field {exc.args[0]!r}") from None
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def _read_csv(path: Path, columns: list[str], required: int) -> tuple[Optional[str], list[tuple[int, dict]]]:
    """Rows of a headed CSV; an optional leading ``# unit: <u>`` line is returned."""
    unit = None
    lines = path.read_text().splitlines()
    body = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            text = stripped.lstrip("#").strip()
            if text.lower().startswith("unit"):
                unit = text.split(":", 1)[1].strip() if ":" in text else text.split()[-1]
            continue
        if stripped:
            body.append((lineno, line))
    if not body:
        raise ParseError(f"{path}: empty file (header required)")
    header = next(csv.reader([body[0][1]]))
    header = [h.strip() for h in header]
    missing = [c for c in columns[:required] if c not in header]
    if missing:
        raise ParseError(f"{path}: header missing columns {missing}")
    rows = []
    for lineno, line in body[1:]:
        values = next(csv.reader([line]))
        if len(values) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} columns, got {len(values)}")
        rows.append((lineno, dict(zip(header, values))))
    return unit, rows


def hardware_path_for(path: Path) -> Path:
    """Sidecar hardware file used when a records CSV is given alone."""
    return path.with_name(path.stem + "_hardware.csv")


def ingest(path: str | Path, format: Optional[str] = None, hardware_path: str | Path | None = None) -> MeasurementTable:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "json":
        return _ingest_json(path)
    if fmt != "csv":
        raise ParseError(f"{path}: unsupported format {fmt!r} (csv or json)")
    hw_path = Path(hardware_path) if hardware_path else hardware_path_for(path)
    if not hw_path.exists():
        raise FileNotFoundError(f"hardware file not found: {hw_path}")
    _, hw_rows = _read_csv(hw_path, HARDWARE_COLUMNS, 4)
    hardware = [_hardware_from_fields(row, f"{hw_path}:{lineno}") for lineno, row in hw_rows]
    unit, rec_rows = _read_csv(path, RECORD_COLUMNS, 3)
    factor = _unit_factor(unit, str(path))
    records = []
    seen = {}
    for lineno, row in rec_rows:
        rec = _record_from_fields(row, factor, f"{path}:{lineno}")
        if rec.key in seen:
            raise DuplicateKeyError(
                f"{path}:{lineno}: duplicate key (model_id={rec.model_id!r}, hardware_id={rec.hardware_id!r}), "
                f"first seen on line {seen[rec.key]}")
        seen[rec.key] = lineno
        records.append(rec)
    return MeasurementTable(tuple(hardware), tuple(records))


def _ingest_json(path: Path) -> MeasurementTable:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, dict) or "hardware" not in data or "records" not in data:
        raise ParseError(f"{path}: expected an object with 'hardware' and 'records'")
    factor = _unit_factor(data.get("unit"), str(path))
    hardware = [_hardware_from_fields(h, f"{path}: hardware[{i}]") for i, h in enumerate(data["hardware"])]
    records = []
    seen = set()
    for i, row in enumerate(data["records"]):
        rec = _record_from_fields(row, factor, f"{path}: records[{i}]")
        if rec.key in seen:
            raise DuplicateKeyError(
                f"{path}: records[{i}]: duplicate key (model_id={rec.model_id!r}, hardware_id={rec.hardware_id!r})")
        seen.add(rec.key)
        records.append(rec)
    return MeasurementTable(tuple(hardware), tuple(records))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(table: MeasurementTable, path: str | Path, format: Optional[str] = None) -> list[Path]:
    """Write ``table``; CSV output also writes the hardware sidecar. Returns written paths."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = {"unit": "kwh", **table.to_dict()}
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return [path]
    if fmt != "csv":
        raise ValueError(f"unsupported format {fmt!r}")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in table.records:
            writer.writerow([_fmt(v) for v in r.to_dict().values()])
    hw_path = hardware_path_for(path)
    with hw_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HARDWARE_COLUMNS)
        for h in table.hardware:
            writer.writerow([_fmt(v) for v in h.to_dict().values()])
    return [path, hw_path]
