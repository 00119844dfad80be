"""One function per CLI command; each takes a validated ``ExperimentConfig`` and writes under its output directory."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fla_slt.common.constants import VOCABULARY_FILE_NAME
from fla_slt.common.exceptions import CheckpointError
from fla_slt.common.logger import LoggerFactory
from fla_slt.corpus.storage import save_corpus
from fla_slt.corpus.synthetic import build_base_vocabulary, corpus_statistics, generate_synthetic_corpus
from fla_slt.corpus.vocabulary import Vocabulary
from fla_slt.diagnostics.dominance import DominanceReport, dominance_report
from fla_slt.diagnostics.norm_trace import load_trace
from fla_slt.diagnostics.plot import plot_trace
from fla_slt.evaluation.evaluator import EvalReport, evaluate_model
from fla_slt.experiment.experiment_config import ExperimentConfig
from fla_slt.experiment.resources import prepare_backend, prepare_corpus
from fla_slt.models.adapter import MlpAdapter
from fla_slt.models.backend import TinySeq2SeqBackend
from fla_slt.models.features import Tap
from fla_slt.models.llm_stage import CarriedEncoder, FeatureTap, SignToTextModel, build_finetune_model
from fla_slt.models.transformer import EncoderDecoderTransformer
from fla_slt.models.visual_encoder import VisualEncoder
from fla_slt.training.checkpoint import load_checkpoint, read_manifest
from fla_slt.training.stages import StageResult, load_stage1_model, run_joint_e2e, run_stage1, run_stage2
from fla_slt.training.trainer import matched_budget

LOG = LoggerFactory.get_logger(__name__)

DOMINANCE_REPORT_FILE_NAME = "dominance.json"
TRACE_PLOT_FILE_NAME = "trace.png"


def _write_vocabulary(experiment: ExperimentConfig, vocab: Vocabulary) -> None:
    experiment.output_directory.mkdir(parents=True, exist_ok=True)
    vocab.save(experiment.output_directory / VOCABULARY_FILE_NAME)


def cmd_gen_data(experiment: ExperimentConfig, workers: int = 1) -> Path:
    spec = experiment.synthetic_spec
    corpus = generate_synthetic_corpus(spec, workers)
    directory = save_corpus(corpus, experiment.corpus_directory, experiment.config_hash)
    build_base_vocabulary(spec, experiment.config.corpus.extra_base_tokens).save(directory / VOCABULARY_FILE_NAME)
    for name, value in corpus_statistics(corpus).items():
        LOG.info(f"{name}: {value:.3f}")
    return directory


def cmd_stage1(experiment: ExperimentConfig, resume_from: Optional[Path] = None, force: bool = False) -> StageResult:
    corpus, _, vocab = prepare_corpus(experiment)
    _write_vocabulary(experiment, vocab)
    return run_stage1(
        corpus,
        vocab,
        experiment.visual_config,
        experiment.light_t_config(len(vocab)),
        experiment.stage_config("stage1"),
        experiment.output_directory / "stage1",
        experiment.stage1_hash,
        resume_from,
        force,
    )


def cmd_stage2(
    experiment: ExperimentConfig,
    stage1_checkpoint: Optional[Path] = None,
    skip_initialing: bool = False,
    resume_from: Optional[Path] = None,
    force: bool = False,
) -> StageResult:
    """Fine-tune on ``<out>/stage1/best`` unless another checkpoint is named or visual initialing is skipped."""
    corpus, base_vocab, vocab = prepare_corpus(experiment)
    _write_vocabulary(experiment, vocab)
    if skip_initialing:
        stage1_checkpoint = None
    elif stage1_checkpoint is None:
        stage1_checkpoint = experiment.output_directory / "stage1" / "best"
    backend = prepare_backend(experiment, corpus, base_vocab, vocab, experiment.output_directory)
    directory_name = "stage2_skip_initialing" if skip_initialing else "stage2"
    return run_stage2(
        stage1_checkpoint,
        backend,
        corpus,
        vocab,
        experiment.visual_config,
        experiment.light_t_config(len(vocab)),
        experiment.stage_config("stage2"),
        experiment.freeze_policy,
        experiment.feature_tap,
        experiment.output_directory / directory_name,
        experiment.config_hash,
        resume_from,
        force,
        stage1_hash=experiment.stage1_hash,
        adapter_hidden_dim=experiment.config.backend.get("adapter_hidden_dim"),
    )


def cmd_e2e(experiment: ExperimentConfig, resume_from: Optional[Path] = None, force: bool = False) -> StageResult:
    corpus, base_vocab, vocab = prepare_corpus(experiment)
    _write_vocabulary(experiment, vocab)
    config = experiment.stage_config("e2e")
    if experiment.config.e2e.matched_budget:
        budget = matched_budget(experiment.stage_config("stage1"), experiment.stage_config("stage2"), len(corpus.train))
        config = config.with_step_budget(budget, len(corpus.train))
        LOG.info(f"joint training gets the factorized budget of {budget} steps")
    backend = prepare_backend(experiment, corpus, base_vocab, vocab, experiment.output_directory)
    return run_joint_e2e(
        corpus,
        vocab,
        experiment.visual_config,
        backend,
        config,
        experiment.output_directory / "e2e",
        experiment.config_hash,
        experiment.selectors,
        resume_from,
        force,
        adapter_hidden_dim=experiment.config.backend.get("adapter_hidden_dim"),
    )


def load_trained_model(
    experiment: ExperimentConfig,
    checkpoint: Path,
    vocab: Vocabulary,
    config_hash: Optional[str] = None,
    force: bool = False,
) -> SignToTextModel:
    """Rebuild the model a checkpoint was trained as (from its recorded stage) and load its weights."""
    stage = read_manifest(checkpoint)["state"]["stage"]
    light_t_config = experiment.light_t_config(len(vocab))
    if stage == "stage1":
        config_hash = experiment.stage1_hash if config_hash is None else config_hash
        return load_stage1_model(checkpoint, experiment.visual_config, light_t_config, config_hash, force)
    if stage not in ("stage2", "e2e"):
        raise CheckpointError(f"checkpoint {checkpoint} holds a '{stage}' model, which cannot translate videos")
    config_hash = experiment.config_hash if config_hash is None else config_hash
    tap = experiment.feature_tap if stage == "stage2" else FeatureTap.sign_wise
    visual_encoder = VisualEncoder(experiment.visual_config)
    carried: Optional[CarriedEncoder] = None
    if tap is FeatureTap.hidden_states:
        light_t = EncoderDecoderTransformer(light_t_config)
        carried = CarriedEncoder(MlpAdapter(visual_encoder.feature_dim, light_t.embedding_dim, Tap.sign_wise), light_t)
    backend = TinySeq2SeqBackend(experiment.backend_config(len(vocab)))
    model = build_finetune_model(
        visual_encoder, backend, tap, experiment.seed, carried, experiment.config.backend.get("adapter_hidden_dim")
    )
    load_checkpoint(checkpoint, model.component_groups(), config_hash=config_hash, force=force)
    return model


def cmd_eval(
    experiment: ExperimentConfig,
    checkpoint: Path,
    split: Optional[str] = None,
    force: bool = False,
) -> EvalReport:
    settings = experiment.config.evaluation
    split = split or settings.split
    corpus, _, vocab = prepare_corpus(experiment)
    model = load_trained_model(experiment, checkpoint, vocab, force=force)
    manifest = read_manifest(checkpoint)
    report = evaluate_model(
        model,
        corpus[split],
        vocab,
        beam=settings.beam,
        max_len=settings.max_length,
        checkpoint_hash=manifest["digest"],
        workers=settings.workers,
        config_hash=experiment.config_hash,
    )
    report.write(experiment.output_directory / "eval" / f"{manifest['state']['stage']}_{split}")
    return report


def cmd_diagnose(
    trace_path: Path,
    output_directory: Path,
    encoder_layer: str = "encoder_last",
    backend_layer: str = "backend_last",
    smoothing: Optional[float] = None,
) -> DominanceReport:
    trace = load_trace(trace_path)
    report = dominance_report(trace, encoder_layer, backend_layer)
    output_directory.mkdir(parents=True, exist_ok=True)
    with open(output_directory / DOMINANCE_REPORT_FILE_NAME, "w", encoding="utf-8") as report_file:
        json.dump(report.to_dict(), report_file, sort_keys=True, indent=2)
        report_file.write("\n")
    plot_trace(trace, output_directory / TRACE_PLOT_FILE_NAME, smoothing)
    LOG.info(
        f"backend grad norm exceeds encoder grad norm in {report.fraction_backend_exceeds:.1%} of {report.steps} steps"
    )
    return report
