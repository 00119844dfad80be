from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from fla_slt.common.exceptions import DiagnosticsError

TRACE_COLUMNS = ("step", "layer_id", "grad_norm", "param_norm", "param_drift")


@dataclass(frozen=True)
class NormRecord:
    step: int
    layer_id: str
    grad_norm: float
    param_norm: float
    # ||theta_t - theta_0|| since the watch was attached
    param_drift: float = 0.0


@dataclass
class NormTrace:
    watched_layers: List[str] = field(default_factory=list)
    records: List[NormRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: NormRecord) -> None:
        if record.grad_norm < 0 or record.param_norm < 0:
            raise DiagnosticsError(f"norms must be >= 0, got {record}")
        if record.layer_id not in self.watched_layers:
            self.watched_layers.append(record.layer_id)
        self.records.append(record)

    def for_layer(self, layer_id: str) -> List[NormRecord]:
        return [record for record in self.records if record.layer_id == layer_id]

    def steps(self) -> List[int]:
        return sorted({record.step for record in self.records})


def export_trace(trace: NormTrace, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as trace_file:
        writer = csv.writer(trace_file, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for record in trace.records:
            norms = (record.grad_norm, record.param_norm, record.param_drift)
            writer.writerow([record.step, record.layer_id, *(repr(value) for value in norms)])
    return path


def load_trace(path: Path) -> NormTrace:
    trace = NormTrace()
    try:
        with open(path, "r", newline="", encoding="utf-8") as trace_file:
            reader = csv.DictReader(trace_file)
            missing = set(TRACE_COLUMNS[:4]) - set(reader.fieldnames or ())
            if missing:
                raise DiagnosticsError(f"{path} is not a norm trace, columns {sorted(missing)} are missing")
            for row in reader:
                trace.append(
                    NormRecord(
                        step=int(row["step"]),
                        layer_id=row["layer_id"],
                        grad_norm=float(row["grad_norm"]),
                        param_norm=float(row["param_norm"]),
                        param_drift=float(row.get("param_drift") or 0.0),
                    )
                )
    except OSError as e:
        raise DiagnosticsError(f"cannot read norm trace {path}: {e}") from e
    return trace
