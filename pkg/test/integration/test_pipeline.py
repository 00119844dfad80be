"""The tiny experiment driven through the command line, from corpus generation to the ablation summary."""
import csv
import json
from pathlib import Path
from typing import List

import pytest
from click.testing import CliRunner
from test.utils.tiny_experiment import write_experiment

from fla_slt.__main__ import main
from fla_slt.common.constants import MANIFEST_FILE_NAME
from fla_slt.diagnostics.norm_trace import load_trace
from fla_slt.experiment.commands import cmd_stage2
from fla_slt.experiment.experiment_config import ExperimentConfig


def invoke(config: Path, *args: str) -> str:
    result = CliRunner().invoke(main, [args[0], "--config", str(config), *args[1:]])
    assert result.exit_code == 0, f"{args}: {result.output} {result.exception!r}"
    return result.output.strip()


def blob_hashes(checkpoint: Path) -> dict:
    manifest = json.loads((checkpoint / MANIFEST_FILE_NAME).read_text())
    return {name: entry["sha256"] for name, entry in manifest["blobs"].items()}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory: pytest.TempPathFactory) -> Path:
    directory = tmp_path_factory.mktemp("pipeline")
    config = write_experiment(directory)
    invoke(config, "gen-data")
    invoke(config, "stage1")
    invoke(config, "stage2")
    return directory


@pytest.fixture(scope="module")
def out(workspace: Path) -> Path:
    return workspace / "out"


@pytest.fixture(scope="module")
def config(workspace: Path) -> Path:
    return workspace / "experiment.json"


def test_corpus_and_stage1_outputs(out: Path) -> None:
    assert (out / "corpus" / MANIFEST_FILE_NAME).is_file()
    for name in ("best", "last", "epoch_001", "epoch_002"):
        assert (out / "stage1" / name / MANIFEST_FILE_NAME).is_file()
    with open(out / "stage1" / "metrics.csv", newline="") as metrics_file:
        splits: List[str] = [row["split"] for row in csv.DictReader(metrics_file)]
    assert splits.count("dev") == 2


def test_stage2_keeps_the_visual_encoder_bit_for_bit(out: Path) -> None:
    stage1, stage2 = blob_hashes(out / "stage1" / "best"), blob_hashes(out / "stage2" / "best")
    assert stage2["visual_encoder"] == stage1["visual_encoder"]
    assert set(stage2) >= {"visual_encoder", "llm_adapter", "backend"}


def test_stage1_is_reproducible(out: Path, tmp_path: Path) -> None:
    config = write_experiment(tmp_path)
    invoke(config, "stage1")
    assert blob_hashes(tmp_path / "out" / "stage1" / "last") == blob_hashes(out / "stage1" / "last")


def test_eval_of_both_stages(config: Path, out: Path) -> None:
    for stage in ("stage1", "stage2"):
        metrics = json.loads(invoke(config, "eval", "--checkpoint", str(out / stage / "best"), "--split", "dev"))
        assert metrics["n_samples"] == 4
        assert 0.0 <= metrics["bleu4"] <= 1.0
        assert (out / "eval" / f"{stage}_dev" / "report.json").is_file()


def test_eval_refuses_another_config_without_force(config: Path, out: Path, tmp_path: Path) -> None:
    other = write_experiment(tmp_path, seed=4)
    checkpoint = str(out / "stage2" / "best")
    result = CliRunner().invoke(main, ["eval", "--config", str(other), "--checkpoint", checkpoint, "--out", str(out)])
    assert result.exit_code == 4
    invoke(other, "eval", "--checkpoint", checkpoint, "--out", str(tmp_path / "forced"), "--force")


def test_stage2_without_initialing(config: Path, out: Path) -> None:
    invoke(config, "stage2", "--skip-initialing")
    assert (out / "stage2_skip_initialing" / "best" / MANIFEST_FILE_NAME).is_file()


def test_hidden_states_tap_reuses_stage1(config: Path, out: Path, tmp_path: Path) -> None:
    overrides = {"feature_tap": "hidden_states", "output_directory": str(tmp_path)}
    result = cmd_stage2(ExperimentConfig.load(config, overrides), out / "stage1" / "best")
    assert set(blob_hashes(result.checkpoint)) >= {"vl_adapter", "light_t"}
    assert blob_hashes(result.checkpoint)["light_t"] == blob_hashes(out / "stage1" / "best")["light_t"]


def test_joint_training_and_diagnosis(config: Path, out: Path) -> None:
    invoke(config, "e2e")
    trace = load_trace(out / "e2e" / "trace.csv")
    assert trace.watched_layers == ["encoder_last", "backend_last"]
    assert len(trace) == 2 * len(trace.steps()) == 6

    report = json.loads(invoke(config, "diagnose"))
    assert report["steps"] == 3
    assert 0.0 <= report["fraction_backend_exceeds"] <= 1.0
    assert (out / "diagnostics" / "trace.png").is_file()
    assert (out / "diagnostics" / "dominance.json").is_file()


def test_downsample_ablation(config: Path, out: Path) -> None:
    summary = Path(invoke(config, "ablate", "--axis", "downsample_rate"))
    with open(summary, newline="") as summary_file:
        rows = list(csv.DictReader(summary_file))
    assert [row["setting"] for row in rows] == ["100%", "50%"]
    assert all(0.0 <= float(row["test_bleu4"]) <= 1.0 for row in rows)
    assert len(list(summary.parent.glob("stage1_*"))) == 2


@pytest.mark.slow
def test_stage1_dev_loss_drops_on_a_larger_corpus(tmp_path: Path) -> None:
    corpus = {
        "glyph_vocab_size": 8,
        "sentence_length_range": [2, 4],
        "frames_per_glyph": 2,
        "jitter": 1,
        "image_size": [16, 16],
        "counts": [400, 40, 40],
        "seed": 3,
        "successors_per_glyph": 3,
        "extra_base_tokens": 0,
    }
    stage1 = {"optimizer": "adam", "lr_groups": {"default": 0.003}, "batch_size": 16, "epochs": 15}
    config = write_experiment(tmp_path, corpus=corpus, stage1=stage1)
    invoke(config, "stage1")
    with open(tmp_path / "out" / "stage1" / "metrics.csv", newline="") as metrics_file:
        dev_losses = [float(row["loss"]) for row in csv.DictReader(metrics_file) if row["split"] == "dev"]
    assert len(dev_losses) == 15
    assert min(dev_losses[-3:]) < 0.8 * dev_losses[0]
