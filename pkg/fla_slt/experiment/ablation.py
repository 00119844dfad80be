"""Ablation sweeps: one fine-tuned model per setting of an axis, summarized in one CSV row each.

Settings that share their stage-1 configuration share one stage-1 run, kept under ``stage1_<hash>``.
"""
from __future__ import annotations

import csv
import multiprocessing
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import torch

from fla_slt.common.constants import MANIFEST_FILE_NAME, SUMMARY_FILE_NAME, TIMINGS_FILE_NAME
from fla_slt.common.exceptions import AblationError
from fla_slt.common.logger import LoggerFactory
from fla_slt.common.system import System
from fla_slt.corpus.sign_video import Corpus
from fla_slt.corpus.vocabulary import Vocabulary
from fla_slt.evaluation.evaluator import EvalReport, evaluate_model
from fla_slt.experiment.experiment_config import ExperimentConfig
from fla_slt.experiment.resources import prepare_backend, prepare_corpus
from fla_slt.models.llm_stage import SignToTextModel
from fla_slt.training.stages import load_stage1_model, run_stage1, run_stage2

LOG = LoggerFactory.get_logger(__name__)

OVERRIDES: Dict[str, Callable[[Any], Dict[str, Any]]] = {
    "downsample_rate": lambda value: {"visual.downsample_rate": value},
    "light_t_scale": lambda value: {"light_t.preset": value},
    "feature_tap": lambda value: {"feature_tap": value},
    "freeze_policy": lambda value: {"freeze": value},
    "backend_pretraining": lambda value: {"backend.pretrained": value},
}
AXES = (*OVERRIDES, "init_epochs")
METRICS = ("bleu1", "bleu2", "bleu3", "bleu4", "rouge_l")
SUMMARY_COLUMNS = [
    "setting",
    "axis",
    "value",
    *(f"dev_{metric}" for metric in METRICS),
    *(f"test_{metric}" for metric in METRICS),
    "stage1_test_bleu4",
    "config_hash",
]


@dataclass(frozen=True)
class AblationSetting:
    axis: str
    value: Any
    experiment: ExperimentConfig
    stage1_checkpoint: str = "best"

    @property
    def label(self) -> str:
        if self.axis == "downsample_rate":
            return f"{self.value * 100:g}%"
        if self.axis == "backend_pretraining":
            return "pretrained" if self.value else "random"
        if self.axis == "init_epochs":
            return f"epoch {self.value}"
        return str(self.value)

    @property
    def directory_name(self) -> str:
        return re.sub(r"[^A-Za-z0-9_.+-]+", "_", self.label)


def ablation_settings(experiment: ExperimentConfig, axis: str) -> List[AblationSetting]:
    if axis not in AXES:
        raise AblationError(f"unknown ablation axis '{axis}', valid axes: {', '.join(AXES)}")
    values: Sequence[Any] = experiment.config.ablation[axis]
    if not values:
        raise AblationError(f"ablation.{axis} lists no values")
    if axis == "init_epochs":
        # one stage-1 run long enough for every snapshot
        shared = experiment.with_overrides(
            {"stage1.epochs": max(values), "stage1.keep_epochs": sorted(set(values))}
        )
        return [AblationSetting(axis, value, shared, f"epoch_{value:03d}") for value in values]
    return [AblationSetting(axis, value, experiment.with_overrides(OVERRIDES[axis](value))) for value in values]


def _metric_cells(prefix: str, report: EvalReport) -> Dict[str, str]:
    return {f"{prefix}_{metric}": repr(float(getattr(report, metric))) for metric in METRICS}


class AblationRunner:
    def __init__(self, experiment: ExperimentConfig, axis: str) -> None:
        self.experiment = experiment
        self.axis = axis
        self.settings = ablation_settings(experiment, axis)
        self.root = experiment.output_directory / "ablation" / axis

    def stage1_directory(self, setting: AblationSetting) -> Path:
        return self.root / f"stage1_{setting.experiment.stage1_hash[:12]}"

    def ensure_stage1(self, setting: AblationSetting, corpus: Corpus, vocab: Vocabulary) -> Path:
        directory = self.stage1_directory(setting)
        checkpoint = directory / setting.stage1_checkpoint
        if (checkpoint / MANIFEST_FILE_NAME).is_file():
            LOG.info(f"reusing stage-1 checkpoint {checkpoint}")
            return checkpoint
        experiment = setting.experiment
        run_stage1(
            corpus,
            vocab,
            experiment.visual_config,
            experiment.light_t_config(len(vocab)),
            experiment.stage_config("stage1"),
            directory,
            experiment.stage1_hash,
        )
        return checkpoint

    def _evaluate(self, model: SignToTextModel, corpus: Corpus, vocab: Vocabulary, split: str) -> EvalReport:
        settings = self.experiment.config.evaluation
        return evaluate_model(
            model,
            corpus[split],
            vocab,
            beam=settings.beam,
            max_len=settings.max_length,
            workers=settings.workers,
            config_hash=self.experiment.config_hash,
        )

    def prepare(self, setting: AblationSetting) -> None:
        """Shared artifacts of a setting: its stage-1 run and the pretrained backend."""
        corpus, base_vocab, vocab = prepare_corpus(setting.experiment)
        self.ensure_stage1(setting, corpus, vocab)
        prepare_backend(setting.experiment, corpus, base_vocab, vocab, self.root)

    def run_setting(self, setting: AblationSetting) -> Dict[str, str]:
        experiment = setting.experiment
        corpus, base_vocab, vocab = prepare_corpus(experiment)
        stage1_checkpoint = self.ensure_stage1(setting, corpus, vocab)
        backend = prepare_backend(experiment, corpus, base_vocab, vocab, self.root)
        directory = self.root / setting.directory_name
        LOG.info(f"ablation {self.axis}: running setting {setting.label}")
        result = run_stage2(
            stage1_checkpoint,
            backend,
            corpus,
            vocab,
            experiment.visual_config,
            experiment.light_t_config(len(vocab)),
            experiment.stage_config("stage2"),
            experiment.freeze_policy,
            experiment.feature_tap,
            directory,
            experiment.config_hash,
            stage1_hash=experiment.stage1_hash,
            adapter_hidden_dim=experiment.config.backend.get("adapter_hidden_dim"),
        )
        row = {"setting": setting.label, "axis": self.axis, "value": str(setting.value), "stage1_test_bleu4": ""}
        for split in ("dev", "test"):
            report = self._evaluate(result.model, corpus, vocab, split)
            report.write(directory / f"eval_{split}")
            row.update(_metric_cells(split, report))
        if self.axis == "init_epochs":
            stage1_model = load_stage1_model(
                stage1_checkpoint,
                experiment.visual_config,
                experiment.light_t_config(len(vocab)),
                experiment.stage1_hash,
            )
            row["stage1_test_bleu4"] = repr(float(self._evaluate(stage1_model, corpus, vocab, "test").bleu4))
        row["config_hash"] = experiment.config_hash
        return row

    def timed_setting(self, index: int) -> Tuple[Dict[str, str], float]:
        started = time.perf_counter()
        row = self.run_setting(self.settings[index])
        return row, time.perf_counter() - started

    def run(self, workers: Optional[int] = None) -> Path:
        workers = workers or int(self.experiment.config.ablation.workers)
        if workers > 1 and System.strict_mode():
            LOG.warning("strict single-threaded mode, running ablation settings sequentially")
            workers = 1
        if workers > 1:
            for setting in self.settings:
                self.prepare(setting)
            results = _run_parallel(self, workers)
        else:
            results = [self.timed_setting(index) for index in range(len(self.settings))]
        return self.write([row for row, _ in results], [seconds for _, seconds in results])

    def write(self, rows: Sequence[Mapping[str, str]], seconds: Sequence[float]) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        summary_path = self.root / SUMMARY_FILE_NAME
        with open(summary_path, "w", newline="", encoding="utf-8") as summary_file:
            writer = csv.DictWriter(summary_file, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        # wall time lives apart so that the summary of a rerun stays byte-identical
        with open(self.root / TIMINGS_FILE_NAME, "w", newline="", encoding="utf-8") as timings_file:
            writer = csv.writer(timings_file, lineterminator="\n")
            writer.writerow(["setting", "seconds"])
            writer.writerows((row["setting"], f"{value:.3f}") for row, value in zip(rows, seconds))
        LOG.info(f"wrote ablation summary {summary_path}")
        return summary_path


_ACTIVE_RUNNER: Optional[AblationRunner] = None


def _single_thread_worker() -> None:
    torch.set_num_threads(1)


def _run_indexed_setting(index: int) -> Tuple[Dict[str, str], float]:
    if _ACTIVE_RUNNER is None:
        raise AblationError("no ablation runner in this worker process")
    return _ACTIVE_RUNNER.timed_setting(index)


def _run_parallel(runner: AblationRunner, workers: int) -> List[Tuple[Dict[str, str], float]]:
    """Settings in forked worker processes, each with its own output subdirectory."""
    global _ACTIVE_RUNNER
    _ACTIVE_RUNNER = runner
    try:
        with ProcessPoolExecutor(
            max_workers=workers, mp_context=multiprocessing.get_context("fork"), initializer=_single_thread_worker
        ) as executor:
            return list(executor.map(_run_indexed_setting, range(len(runner.settings))))
    finally:
        _ACTIVE_RUNNER = None


def run_ablation(experiment: ExperimentConfig, axis: Optional[str] = None, workers: Optional[int] = None) -> Path:
    return AblationRunner(experiment, axis or experiment.config.ablation.axis).run(workers)
