import math
from pathlib import Path

import pytest

from fla_slt.common.exceptions import DiagnosticsError
from fla_slt.diagnostics.dominance import dominance_report
from fla_slt.diagnostics.norm_trace import NormRecord, NormTrace, export_trace, load_trace
from fla_slt.diagnostics.plot import exponential_smoothing, plot_trace


def make_trace(encoder_norms, backend_norms) -> NormTrace:
    trace = NormTrace()
    for step, (encoder_norm, backend_norm) in enumerate(zip(encoder_norms, backend_norms)):
        trace.append(NormRecord(step, "encoder_last", encoder_norm, 1.0, 0.1 * step))
        trace.append(NormRecord(step, "backend_last", backend_norm, 2.0, 0.2 * step))
    return trace


def test_export_and_load_keep_every_value(tmp_path: Path) -> None:
    trace = make_trace([0.1, 1 / 3], [2.5, 1e-12])
    loaded = load_trace(export_trace(trace, tmp_path / "trace.csv"))
    assert loaded == trace
    assert (tmp_path / "trace.csv").read_text().splitlines()[0] == "step,layer_id,grad_norm,param_norm,param_drift"


def test_load_rejects_other_csv(tmp_path: Path) -> None:
    (tmp_path / "other.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DiagnosticsError):
        load_trace(tmp_path / "other.csv")
    with pytest.raises(DiagnosticsError):
        load_trace(tmp_path / "missing.csv")


def test_negative_norms_are_rejected() -> None:
    with pytest.raises(DiagnosticsError):
        NormTrace().append(NormRecord(0, "layer", -1.0, 1.0))


def test_dominance_counts_strict_excess_only() -> None:
    report = dominance_report(make_trace([1.0, 2.0, 1.0, 0.0], [2.0, 2.0, 0.5, 1.0]), "encoder_last", "backend_last")
    assert report.steps == 4
    assert report.fraction_backend_exceeds == 0.5
    assert report.mean_norm_ratio == pytest.approx((2.0 + 1.0 + 0.5) / 3)
    assert report.to_dict()["final_drift"] == pytest.approx({"encoder_last": 0.3, "backend_last": 0.6})


def test_mean_ratio_without_encoder_gradient_is_nan() -> None:
    report = dominance_report(make_trace([0.0], [1.0]), "encoder_last", "backend_last")
    assert report.fraction_backend_exceeds == 1.0
    assert math.isnan(report.mean_norm_ratio)


def test_dominance_needs_both_layers() -> None:
    with pytest.raises(DiagnosticsError):
        dominance_report(NormTrace(), "encoder_last", "backend_last")
    with pytest.raises(DiagnosticsError):
        dominance_report(make_trace([1.0], [1.0]), "encoder_last", "adapter")


def test_smoothing() -> None:
    assert exponential_smoothing([1.0, 3.0], None) == [1.0, 3.0]
    assert exponential_smoothing([1.0, 3.0, 3.0], 0.5) == [1.0, 2.0, 2.5]
    with pytest.raises(DiagnosticsError):
        exponential_smoothing([1.0], 1.5)


def test_plot_writes_png(tmp_path: Path) -> None:
    path = plot_trace(make_trace([1.0, 0.5, 0.25], [2.0, 2.5, 3.0]), tmp_path / "plots" / "trace.png", 0.5)
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    with pytest.raises(DiagnosticsError):
        plot_trace(NormTrace(), tmp_path / "empty.png")


def test_ten_thousand_records_survive_export_and_load(tmp_path: Path) -> None:
    trace = NormTrace()
    for step in range(5000):
        trace.append(NormRecord(step, "encoder_last", math.sqrt(step) / 7, 1.0 + step / 3, step * 1e-7))
        trace.append(NormRecord(step, "backend_last", 1 / (step + 1), math.pi * step, 0.0))
    loaded = load_trace(export_trace(trace, tmp_path / "trace.csv"))
    assert len(loaded) == 10000
    assert loaded == trace
