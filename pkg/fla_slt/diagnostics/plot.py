from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from fla_slt.common.exceptions import DiagnosticsError  # noqa: E402
from fla_slt.diagnostics.norm_trace import NormTrace  # noqa: E402


def exponential_smoothing(values: Sequence[float], factor: Optional[float]) -> List[float]:
    """s_0 = v_0, s_t = factor * s_{t-1} + (1 - factor) * v_t; ``None`` or 0 keeps the raw values."""
    if not factor:
        return list(values)
    if not 0.0 < factor < 1.0:
        raise DiagnosticsError(f"smoothing factor must lie in (0, 1), got {factor}")
    smoothed: List[float] = []
    for value in values:
        smoothed.append(value if not smoothed else factor * smoothed[-1] + (1.0 - factor) * value)
    return smoothed


def plot_trace(trace: NormTrace, path: Path, smoothing: Optional[float] = None) -> Path:
    """Two panels over the step axis: gradient norm (left) and parameter norm (right), one line per layer."""
    if not trace.records:
        raise DiagnosticsError("cannot plot an empty trace")
    figure, (grad_axis, param_axis) = plt.subplots(1, 2, figsize=(12, 4.5))
    for layer_id in trace.watched_layers:
        records = trace.for_layer(layer_id)
        steps = [record.step for record in records]
        grad_norms = exponential_smoothing([record.grad_norm for record in records], smoothing)
        param_norms = exponential_smoothing([record.param_norm for record in records], smoothing)
        grad_axis.plot(steps, grad_norms, label=layer_id)
        param_axis.plot(steps, param_norms, label=layer_id)
    grad_axis.set_title("grad norm")
    param_axis.set_title("parameter norm")
    for axis in (grad_axis, param_axis):
        axis.set_xlabel("step")
        axis.legend(fontsize="small")
    figure.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, bbox_inches="tight")
    plt.close(figure)
    return path
