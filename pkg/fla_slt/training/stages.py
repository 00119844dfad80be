"""The three training regimes: visual initialing, LLM fine-tuning and the joint end-to-end baseline."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

from fla_slt.common.constants import MANIFEST_FILE_NAME, METRICS_LOG_FILE_NAME, TRACE_FILE_NAME
from fla_slt.common.exceptions import CheckpointError, ConfigValidationError, FeatureTapError, FreezeViolationError
from fla_slt.common.logger import LoggerFactory
from fla_slt.common.system import System
from fla_slt.corpus.sign_video import Corpus, SignVideo
from fla_slt.corpus.vocabulary import Vocabulary
from fla_slt.diagnostics.norm_trace import NormTrace, export_trace, load_trace
from fla_slt.diagnostics.watcher import BACKEND_LAST, ENCODER_LAST, watch
from fla_slt.evaluation.evaluator import evaluate_model
from fla_slt.models.llm_stage import (
    CarriedEncoder,
    FeatureTap,
    FreezePolicy,
    SignToTextModel,
    apply_freeze,
    build_finetune_model,
    build_stage1_model,
    frozen_checksum,
    seeded_component,
)
from fla_slt.models.transformer import EncoderDecoderTransformer, TransformerConfig
from fla_slt.models.visual_encoder import VisualEncoder, VisualEncoderConfig
from fla_slt.training.checkpoint import TrainState, load_checkpoint
from fla_slt.training.trainer import StageConfig, Trainer

LOG = LoggerFactory.get_logger(__name__)

# stage 2 without visual initialing: random backbone kept fixed, temporal module learns
SKIP_INITIALING_FREEZE = FreezePolicy(backbone_frozen=True, temporal_frozen=False)


@dataclass
class StageResult:
    model: SignToTextModel
    state: TrainState
    output_directory: Path
    frozen_checksums: Optional[Tuple[str, str]] = None
    trace: Optional[NormTrace] = None

    @property
    def checkpoint(self) -> Path:
        return self.output_directory / "best"

    @property
    def metrics_path(self) -> Path:
        return self.output_directory / METRICS_LOG_FILE_NAME


def dev_bleu_scorer(
    dev: Sequence[SignVideo], vocab: Vocabulary, config: StageConfig
) -> Optional[Callable[[SignToTextModel], float]]:
    if not dev or not config.select_by_dev_bleu:
        return None

    def score(model: SignToTextModel) -> float:
        return evaluate_model(model, dev, vocab, beam=config.dev_beam, max_len=config.dev_max_length).bleu4

    return score


def continued_trace(path: Path, trace: NormTrace, resumed_at: Optional[int]) -> NormTrace:
    """Earlier records of a resumed run (steps below the resume step) followed by the new ones."""
    if not path.is_file():
        return trace
    continued = NormTrace(watched_layers=list(trace.watched_layers))
    for record in load_trace(path).records:
        if resumed_at is None or record.step < resumed_at:
            continued.append(record)
    for record in trace.records:
        continued.append(record)
    return continued


def _fit(
    model: SignToTextModel,
    trainer: Trainer,
    corpus: Corpus,
    resume_from: Optional[Path],
    force: bool,
) -> TrainState:
    if resume_from is not None:
        trainer.resume(resume_from, force)
    state = trainer.fit(corpus.train, corpus.dev)
    load_checkpoint(trainer.best_checkpoint, model.component_groups())
    return state


def run_stage1(
    corpus: Corpus,
    vocab: Vocabulary,
    visual_config: VisualEncoderConfig,
    light_t_config: TransformerConfig,
    config: StageConfig,
    output_directory: Path,
    config_hash: str,
    resume_from: Optional[Path] = None,
    force: bool = False,
) -> StageResult:
    """Visual initialing: visual encoder, VL-Adapter and Light-T trained jointly."""
    if light_t_config.vocab_size != len(vocab):
        raise ConfigValidationError(f"Light-T vocabulary {light_t_config.vocab_size} != corpus vocabulary {len(vocab)}")
    System.seed_everything(config.seed)
    model = build_stage1_model(
        lambda: VisualEncoder(visual_config), lambda: EncoderDecoderTransformer(light_t_config), config.seed
    )
    trainer = Trainer(
        model, config, vocab, output_directory, config_hash, "stage1", dev_bleu_scorer(corpus.dev, vocab, config)
    )
    state = _fit(model, trainer, corpus, resume_from, force)
    return StageResult(model=model, state=state, output_directory=output_directory)


def load_stage1_model(
    checkpoint: Path,
    visual_config: VisualEncoderConfig,
    light_t_config: TransformerConfig,
    config_hash: Optional[str] = None,
    force: bool = False,
) -> SignToTextModel:
    if not (checkpoint / MANIFEST_FILE_NAME).is_file():
        raise CheckpointError(f"stage-1 checkpoint {checkpoint} does not exist")
    model = build_stage1_model(
        lambda: VisualEncoder(visual_config), lambda: EncoderDecoderTransformer(light_t_config), seed=0
    )
    load_checkpoint(checkpoint, model.component_groups(), config_hash=config_hash, force=force)
    return model


def run_stage2(
    stage1_checkpoint: Optional[Path],
    backend: EncoderDecoderTransformer,
    corpus: Corpus,
    vocab: Vocabulary,
    visual_config: VisualEncoderConfig,
    light_t_config: TransformerConfig,
    config: StageConfig,
    policy: FreezePolicy,
    tap: FeatureTap,
    output_directory: Path,
    config_hash: str,
    resume_from: Optional[Path] = None,
    force: bool = False,
    stage1_hash: Optional[str] = None,
    adapter_hidden_dim: Optional[int] = None,
) -> StageResult:
    """LLM fine-tuning: fresh LLM-Adapter plus backend on top of the (frozen) stage-1 visual encoder.

    Without a stage-1 checkpoint the visual encoder starts from its initialization with the backbone frozen and
    the temporal module trainable. ``stage1_hash`` is the config hash expected in the stage-1 checkpoint, by default
    ``config_hash``.
    """
    if backend.vocab_size != len(vocab):
        raise ConfigValidationError(f"backend vocabulary {backend.vocab_size} != corpus vocabulary {len(vocab)}")
    System.seed_everything(config.seed)
    carried: Optional[CarriedEncoder] = None
    if stage1_checkpoint is None:
        if tap is FeatureTap.hidden_states:
            raise FeatureTapError("the hidden_states tap needs a stage-1 checkpoint")
        LOG.info("no stage-1 checkpoint, fine-tuning on a fresh visual encoder with frozen backbone")
        visual_encoder = seeded_component(config.seed, "visual_encoder", lambda: VisualEncoder(visual_config))
        policy = SKIP_INITIALING_FREEZE
    else:
        stage1 = load_stage1_model(stage1_checkpoint, visual_config, light_t_config, stage1_hash or config_hash, force)
        visual_encoder = stage1.visual_encoder
        if tap is FeatureTap.hidden_states:
            carried = CarriedEncoder(stage1.adapter, stage1.backend)
    model = build_finetune_model(visual_encoder, backend, tap, config.seed, carried, adapter_hidden_dim)
    apply_freeze(model, policy)
    before = frozen_checksum(model)
    trainer = Trainer(
        model, config, vocab, output_directory, config_hash, "stage2", dev_bleu_scorer(corpus.dev, vocab, config)
    )
    state = _fit(model, trainer, corpus, resume_from, force)
    after = frozen_checksum(model)
    if after != before:
        raise FreezeViolationError(f"frozen parameters changed during stage 2, checksum {before} became {after}")
    return StageResult(model=model, state=state, output_directory=output_directory, frozen_checksums=(before, after))


def run_joint_e2e(
    corpus: Corpus,
    vocab: Vocabulary,
    visual_config: VisualEncoderConfig,
    backend: EncoderDecoderTransformer,
    config: StageConfig,
    output_directory: Path,
    config_hash: str,
    selectors: Sequence[str] = (ENCODER_LAST, BACKEND_LAST),
    resume_from: Optional[Path] = None,
    force: bool = False,
    adapter_hidden_dim: Optional[int] = None,
) -> StageResult:
    """Visual encoder, LLM-Adapter and backend trained together from their initializations, norms traced."""
    if backend.vocab_size != len(vocab):
        raise ConfigValidationError(f"backend vocabulary {backend.vocab_size} != corpus vocabulary {len(vocab)}")
    System.seed_everything(config.seed)
    visual_encoder = seeded_component(config.seed, "visual_encoder", lambda: VisualEncoder(visual_config))
    model = build_finetune_model(
        visual_encoder, backend, FeatureTap.sign_wise, config.seed, adapter_hidden_dim=adapter_hidden_dim
    )
    trainer = Trainer(
        model, config, vocab, output_directory, config_hash, "e2e", dev_bleu_scorer(corpus.dev, vocab, config)
    )
    trace_path = output_directory / TRACE_FILE_NAME
    handle = watch(model, selectors, trainer.backward_finished)
    try:
        state = _fit(model, trainer, corpus, resume_from, force)
    finally:
        trace = handle.detach()
        if resume_from is not None:
            trace = continued_trace(trace_path, trace, trainer.resumed_at)
        export_trace(trace, trace_path)
    return StageResult(model=model, state=state, output_directory=output_directory, trace=trace)
