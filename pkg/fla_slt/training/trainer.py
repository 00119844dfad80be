from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import torch
from signalslot import Signal
from torch.optim import Optimizer

from fla_slt.common.config import Config
from fla_slt.common.constants import GRADIENT_CLIP_NORM, LABEL_SMOOTHING, METRICS_LOG_FILE_NAME
from fla_slt.common.exceptions import ConfigValidationError, DivergenceError
from fla_slt.common.logger import LoggerFactory
from fla_slt.common.system import System
from fla_slt.corpus.batch import Batch, epoch_order, make_loader
from fla_slt.corpus.sign_video import SignVideo
from fla_slt.corpus.vocabulary import Vocabulary
from fla_slt.models.llm_stage import SignToTextModel, finetune_forward
from fla_slt.training.checkpoint import TrainState, load_checkpoint, save_checkpoint
from fla_slt.training.metrics_log import MetricsLog
from fla_slt.training.schedule import apply_cosine_lr, current_rates

LOG = LoggerFactory.get_logger(__name__)

OPTIMIZERS = ("sgd", "adam")
DEFAULT_GROUP = "default"
LAST_CHECKPOINT = "last"
BEST_CHECKPOINT = "best"


@dataclass(frozen=True)
class StageConfig:
    optimizer: str = "sgd"
    lr_groups: Mapping[str, float] = field(default_factory=lambda: {DEFAULT_GROUP: 1e-2})
    momentum: float = 0.9
    lr_min_ratio: float = 0.0
    batch_size: int = 8
    epochs: int = 30
    label_smoothing: float = LABEL_SMOOTHING
    gradient_clip: float = GRADIENT_CLIP_NORM
    seed: int = 7
    max_steps: Optional[int] = None
    dev_beam: int = 1
    dev_max_length: int = 32
    select_by_dev_bleu: bool = True
    keep_epochs: Sequence[int] = ()

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ConfigValidationError(f"optimizer must be one of {OPTIMIZERS}, got '{self.optimizer}'")
        if not self.lr_groups:
            raise ConfigValidationError("lr_groups must name at least one learning rate")
        for name, rate in self.lr_groups.items():
            if rate <= 0:
                raise ConfigValidationError(f"learning rate of group '{name}' must be > 0, got {rate}")
        if self.epochs < 1:
            raise ConfigValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.lr_min_ratio <= 1.0:
            raise ConfigValidationError(f"lr_min_ratio must lie in [0, 1], got {self.lr_min_ratio}")
        if self.gradient_clip <= 0:
            raise ConfigValidationError(f"gradient_clip must be > 0, got {self.gradient_clip}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigValidationError(f"max_steps must be >= 1, got {self.max_steps}")

    @classmethod
    def from_config(cls, config: Config, seed: int) -> StageConfig:
        return cls(
            optimizer=config.optimizer,
            lr_groups=dict(config.lr_groups),
            momentum=config.momentum,
            lr_min_ratio=config.lr_min_ratio,
            batch_size=config.batch_size,
            epochs=config.epochs,
            label_smoothing=config.label_smoothing,
            gradient_clip=config.gradient_clip,
            seed=seed,
            max_steps=config.get("max_steps"),
            dev_beam=config.dev_beam,
            dev_max_length=config.dev_max_length,
            select_by_dev_bleu=config.select_by_dev_bleu,
            keep_epochs=tuple(config.get("keep_epochs") or ()),
        )

    def rate_for(self, group: str) -> float:
        if group in self.lr_groups:
            return float(self.lr_groups[group])
        if DEFAULT_GROUP in self.lr_groups:
            return float(self.lr_groups[DEFAULT_GROUP])
        raise ConfigValidationError(f"no learning rate for component group '{group}' and no '{DEFAULT_GROUP}' rate")

    def steps_per_epoch(self, sample_count: int) -> int:
        return math.ceil(sample_count / self.batch_size)

    def planned_steps(self, sample_count: int) -> int:
        steps = self.epochs * self.steps_per_epoch(sample_count)
        return steps if self.max_steps is None else min(steps, self.max_steps)

    def with_step_budget(self, steps: int, sample_count: int) -> StageConfig:
        """Enough epochs to run exactly ``steps`` optimizer steps."""
        return replace(self, epochs=math.ceil(steps / self.steps_per_epoch(sample_count)), max_steps=steps)


def matched_budget(stage1: StageConfig, stage2: StageConfig, sample_count: int) -> int:
    """Joint training gets as many steps as both factorized stages together."""
    return stage1.planned_steps(sample_count) + stage2.planned_steps(sample_count)


def build_optimizer(model: SignToTextModel, config: StageConfig) -> Optimizer:
    groups: List[Dict[str, object]] = []
    for name, module in model.component_groups().items():
        parameters = [parameter for parameter in module.parameters() if parameter.requires_grad]
        if not parameters:
            continue
        rate = config.rate_for(name)
        groups.append({"params": parameters, "name": name, "peak_lr": rate, "lr": rate})
    if not groups:
        raise ConfigValidationError("the model has no trainable parameters")
    if config.optimizer == "sgd":
        return torch.optim.SGD(groups, lr=config.rate_for(str(groups[0]["name"])), momentum=config.momentum)
    return torch.optim.Adam(groups, lr=config.rate_for(str(groups[0]["name"])))


class Trainer:
    """Single-writer optimization loop over one model.

    Emits ``backward_finished(step, model)`` between backward pass and gradient clipping,
    ``step_finished(step, loss)`` after each optimizer step and ``epoch_finished(epoch, state)`` after each
    epoch's checkpoint.
    """

    def __init__(
        self,
        model: SignToTextModel,
        config: StageConfig,
        vocab: Vocabulary,
        output_directory: Path,
        config_hash: str,
        stage: str,
        dev_bleu: Optional[Callable[[SignToTextModel], float]] = None,
    ) -> None:
        self.backward_finished = Signal(args=["step", "model"])
        self.step_finished = Signal(args=["step", "loss"])
        self.epoch_finished = Signal(args=["epoch", "state"])
        self.model = model
        self.config = config
        self.vocab = vocab
        self.output_directory = output_directory
        self.config_hash = config_hash
        self.dev_bleu = dev_bleu
        self.optimizer = build_optimizer(model, config)
        self.state = TrainState(stage=stage)
        group_names = [str(group["name"]) for group in self.optimizer.param_groups]
        self.metrics = MetricsLog(output_directory / METRICS_LOG_FILE_NAME, group_names, config_hash)
        self.resumed_at: Optional[int] = None
        self._total_steps = 1

    @property
    def trainable_parameters(self) -> List[torch.nn.Parameter]:
        return [parameter for group in self.optimizer.param_groups for parameter in group["params"]]

    @property
    def best_checkpoint(self) -> Path:
        return self.output_directory / BEST_CHECKPOINT

    @property
    def last_checkpoint(self) -> Path:
        return self.output_directory / LAST_CHECKPOINT

    def resume(self, path: Path, force: bool = False) -> None:
        self.state = load_checkpoint(
            path, self.model.component_groups(), self.optimizer, config_hash=self.config_hash, force=force
        )
        if self.state.rng_state is not None:
            torch.set_rng_state(self.state.rng_state)
        self.metrics.resume(self.state.epoch)
        self.resumed_at = self.state.step
        LOG.info(f"resuming {self.state.stage} at epoch {self.state.epoch}, step {self.state.step}")

    def train_step(self, batch: Batch) -> float:
        apply_cosine_lr(self.optimizer, self.state.step, self._total_steps, self.config.lr_min_ratio)
        loss = finetune_forward(self.model, batch, self.config.label_smoothing)
        if not torch.isfinite(loss):
            raise self._diverged(float(loss))
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        self.backward_finished.emit(step=self.state.step, model=self.model)
        torch.nn.utils.clip_grad_norm_(self.trainable_parameters, self.config.gradient_clip)
        self.optimizer.step()
        value = float(loss)
        self.metrics.append(self.state.step, self.state.epoch, "train", value, dict(current_rates(self.optimizer)))
        self.step_finished.emit(step=self.state.step, loss=value)
        self.state.step += 1
        return value

    def dev_loss(self, samples: Sequence[SignVideo]) -> float:
        self.model.eval()
        total, count = 0.0, 0
        with torch.no_grad():
            loader = make_loader(samples, self.vocab, self.config.batch_size, range(len(samples)))
            for batch in loader:
                total += float(finetune_forward(self.model, batch, self.config.label_smoothing)) * len(batch)
                count += len(batch)
        self.model.train()
        return total / count

    def fit(self, train: Sequence[SignVideo], dev: Sequence[SignVideo] = ()) -> TrainState:
        self._total_steps = self.config.planned_steps(len(train))
        workers = System.loader_workers()
        if not self.metrics.ready:
            self.metrics.start()
        self.model.train()
        LOG.info(
            f"{self.state.stage}: {self.config.epochs} epochs, {self._total_steps} steps, "
            f"{sum(parameter.numel() for parameter in self.trainable_parameters)} trainable parameters"
        )
        for epoch in range(self.state.epoch, self.config.epochs):
            if self.state.step >= self._total_steps:
                break
            self.state.epoch = epoch
            order = epoch_order(len(train), self.config.seed, epoch)
            for batch in make_loader(train, self.vocab, self.config.batch_size, order, workers):
                if self.state.step >= self._total_steps:
                    break
                self.train_step(batch)
            self._finish_epoch(epoch, dev)
        return self.state

    def _finish_epoch(self, epoch: int, dev: Sequence[SignVideo]) -> None:
        bleu4: Optional[float] = None
        if dev:
            loss = self.dev_loss(dev)
            if self.dev_bleu is not None and self.config.select_by_dev_bleu:
                bleu4 = self.dev_bleu(self.model)
                self.model.train()
            self.metrics.append(self.state.step, epoch, "dev", loss, bleu4=bleu4)
            LOG.info(
                f"{self.state.stage} epoch {epoch}: dev loss {loss:.4f}"
                + ("" if bleu4 is None else f", dev BLEU-4 {bleu4:.4f}")
            )
        self.state.epoch = epoch + 1
        improved = bleu4 is None or bleu4 > self.state.best_dev_bleu
        if improved:
            self.state.best_dev_bleu = -1.0 if bleu4 is None else bleu4
            self.state.best_epoch = epoch
        self.state.rng_state = torch.get_rng_state()
        groups = self.model.component_groups()
        save_checkpoint(self.last_checkpoint, groups, self.state, self.config_hash, self.optimizer)
        if improved:
            save_checkpoint(self.best_checkpoint, groups, self.state, self.config_hash)
        if epoch + 1 in self.config.keep_epochs:
            save_checkpoint(self.output_directory / f"epoch_{epoch + 1:03d}", groups, self.state, self.config_hash)
        self.epoch_finished.emit(epoch=epoch, state=self.state)

    def _diverged(self, loss: float) -> DivergenceError:
        self.output_directory.mkdir(parents=True, exist_ok=True)
        dump_path = self.output_directory / f"divergence_step{self.state.step}.json"
        dump = {
            "stage": self.state.stage,
            "step": self.state.step,
            "epoch": self.state.epoch,
            "loss": repr(loss),
            "learning_rates": dict(current_rates(self.optimizer)),
            "config_hash": self.config_hash,
            "last_log_lines": list(LoggerFactory.get_last_lines()) if LoggerFactory.is_instantiated() else [],
        }
        with open(dump_path, "w", encoding="utf-8") as dump_file:
            json.dump(dump, dump_file, indent=2)
        LOG.error(f"non-finite loss at step {self.state.step}, diagnostic dump written to {dump_path}")
        return DivergenceError(f"loss became {loss} at step {self.state.step}", self.state.step, dump_path)
