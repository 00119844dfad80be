from pathlib import Path

from fla_slt.training.metrics_log import MetricsLog


def test_rows_are_appended_with_rates_per_group(tmp_path: Path) -> None:
    log = MetricsLog(tmp_path / "run" / "metrics.csv", ["llm_adapter", "backend"], "abc")
    log.append(0, 0, "train", 2.5, {"llm_adapter": 0.1, "backend": 0.01})
    log.append(3, 0, "dev", 2.0, bleu4=0.25)

    lines = (tmp_path / "run" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "step,epoch,split,loss,bleu4,lr_llm_adapter,lr_backend,config_hash"
    assert lines[1] == "0,0,train,2.5,,0.1,0.01,abc"
    assert lines[2] == "3,0,dev,2.0,0.25,,,abc"
    assert log.losses() == [2.5]
    assert log.losses("dev") == [2.0]


def test_fresh_run_replaces_an_earlier_log(tmp_path: Path) -> None:
    path = tmp_path / "metrics.csv"
    MetricsLog(path, ["default", "backend"], "abc").append(0, 0, "train", 1.0, {"default": 0.1, "backend": 0.01})
    rerun = MetricsLog(path, ["default"], "def")
    rerun.append(0, 0, "train", 0.5, {"default": 0.2})
    assert path.read_text().splitlines() == [
        "step,epoch,split,loss,bleu4,lr_default,config_hash",
        "0,0,train,0.5,,0.2,def",
    ]


def test_resumed_log_keeps_checkpointed_epochs_only(tmp_path: Path) -> None:
    path = tmp_path / "metrics.csv"
    first = MetricsLog(path, ["default"], "abc")
    first.append(0, 0, "train", 1.0)
    first.append(1, 0, "dev", 0.9)
    first.append(1, 1, "train", 0.8)
    resumed = MetricsLog(path, ["default"], "abc")
    resumed.resume(1)
    resumed.append(1, 1, "train", 0.7)
    assert resumed.losses() == [1.0, 0.7]
    assert resumed.losses("dev") == [0.9]
    assert path.read_text().count("step,epoch") == 1


def test_resume_rewrites_rows_under_a_changed_header(tmp_path: Path) -> None:
    path = tmp_path / "metrics.csv"
    MetricsLog(path, ["default", "backend"], "abc").append(0, 0, "train", 1.0, {"default": 0.1, "backend": 0.01})
    resumed = MetricsLog(path, ["default", "llm_adapter"], "abc")
    resumed.resume(1)
    resumed.append(1, 1, "train", 0.5, {"default": 0.2, "llm_adapter": 0.3})
    rows = resumed.rows()
    assert list(rows[0]) == resumed.columns
    assert [row["lr_llm_adapter"] for row in rows] == ["", "0.3"]
    assert [row["config_hash"] for row in rows] == ["abc", "abc"]


def test_resume_without_earlier_log_starts_empty(tmp_path: Path) -> None:
    log = MetricsLog(tmp_path / "metrics.csv", ["default"], "abc")
    log.resume(3)
    assert log.ready
    assert log.rows() == []
