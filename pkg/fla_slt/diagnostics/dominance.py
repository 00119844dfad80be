from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List

from fla_slt.common.exceptions import DiagnosticsError
from fla_slt.diagnostics.norm_trace import NormRecord, NormTrace


@dataclass
class DominanceReport:
    encoder_layer: str
    backend_layer: str
    steps: int
    # share of steps where the backend gradient norm is strictly larger
    fraction_backend_exceeds: float
    mean_norm_ratio: float
    drift: Dict[str, List[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "encoder_layer": self.encoder_layer,
            "backend_layer": self.backend_layer,
            "steps": self.steps,
            "fraction_backend_exceeds": self.fraction_backend_exceeds,
            "mean_norm_ratio": self.mean_norm_ratio,
            "final_drift": {layer: values[-1] for layer, values in self.drift.items() if values},
        }


def _by_step(trace: NormTrace, layer_id: str) -> Dict[int, NormRecord]:
    records = {record.step: record for record in trace.for_layer(layer_id)}
    if not records:
        raise DiagnosticsError(f"layer '{layer_id}' is not in the trace, it holds {trace.watched_layers}")
    return records


def dominance_report(trace: NormTrace, encoder_layer: str, backend_layer: str) -> DominanceReport:
    if not trace.records:
        raise DiagnosticsError("cannot report on an empty trace")
    encoder, backend = _by_step(trace, encoder_layer), _by_step(trace, backend_layer)
    steps = sorted(set(encoder) & set(backend))
    if not steps:
        raise DiagnosticsError(f"'{encoder_layer}' and '{backend_layer}' share no recorded step")
    exceeds = sum(1 for step in steps if backend[step].grad_norm > encoder[step].grad_norm)
    ratios = [backend[step].grad_norm / encoder[step].grad_norm for step in steps if encoder[step].grad_norm > 0]
    return DominanceReport(
        encoder_layer=encoder_layer,
        backend_layer=backend_layer,
        steps=len(steps),
        fraction_backend_exceeds=exceeds / len(steps),
        mean_norm_ratio=sum(ratios) / len(ratios) if ratios else math.nan,
        drift={
            encoder_layer: [encoder[step].param_drift for step in steps],
            backend_layer: [backend[step].param_drift for step in steps],
        },
    )
