from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from fla_slt.common.config import BoundConfig, Config, validate_config
from fla_slt.common.config.bound import DEFAULT_TEMPLATE_NAME
from fla_slt.corpus.synthetic import SyntheticSpec
from fla_slt.models.backend import PretrainConfig
from fla_slt.models.llm_stage import FeatureTap, FreezePolicy
from fla_slt.models.transformer import TransformerConfig
from fla_slt.models.visual_encoder import VisualEncoderConfig
from fla_slt.training.trainer import StageConfig

# where a run writes does not change what it computes
UNHASHED_KEYS = ("output_directory", "logs_directory")
STAGE1_SECTIONS = ("seed", "corpus", "visual", "light_t", "stage1")
BACKEND_SECTIONS = ("seed", "corpus", "backend", "pretrain")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment file plus typed views of its sections."""

    config: Config

    @classmethod
    def load(cls, path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
        """File values over template defaults, ``overrides`` (dotted keys) over both."""
        bound = BoundConfig(DEFAULT_TEMPLATE_NAME if path is None else str(Path(path).resolve()))
        return cls.from_config(bound, overrides)

    @classmethod
    def from_config(cls, config: Config, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
        merged = config.with_overrides(overrides or {})
        validate_config(merged)
        return cls(merged)

    def with_overrides(self, overrides: Mapping[str, Any]) -> ExperimentConfig:
        return self.from_config(self.config, overrides)

    @property
    def config_hash(self) -> str:
        return self.section_hash(*[key for key in self.config if key not in UNHASHED_KEYS])

    def section_hash(self, *keys: str) -> str:
        return Config({key: self.config[key] for key in sorted(keys)}).digest()

    @property
    def stage1_hash(self) -> str:
        return self.section_hash(*STAGE1_SECTIONS)

    @property
    def backend_hash(self) -> str:
        return self.section_hash(*BACKEND_SECTIONS)

    @property
    def seed(self) -> int:
        return int(self.config.seed)

    @property
    def output_directory(self) -> Path:
        return Path(self.config.output_directory)

    @property
    def logs_directory(self) -> Path:
        return Path(self.config.logs_directory)

    @property
    def corpus_directory(self) -> Path:
        path = self.config.corpus.get("path")
        return Path(path) if path else self.output_directory / "corpus"

    @property
    def external_corpus(self) -> bool:
        return bool(self.config.corpus.get("path"))

    @property
    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec.from_config(self.config.corpus)

    @property
    def visual_config(self) -> VisualEncoderConfig:
        return VisualEncoderConfig.from_config(self.config.visual)

    def light_t_config(self, vocab_size: int) -> TransformerConfig:
        return TransformerConfig.from_config(self.config.light_t, vocab_size)

    def backend_config(self, vocab_size: int) -> TransformerConfig:
        return TransformerConfig.from_config(self.config.backend, vocab_size)

    @property
    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig.from_config(self.config.pretrain)

    def stage_config(self, stage: str) -> StageConfig:
        return StageConfig.from_config(getattr(self.config, stage), self.seed)

    @property
    def feature_tap(self) -> FeatureTap:
        return FeatureTap(self.config.feature_tap)

    @property
    def freeze_policy(self) -> FreezePolicy:
        return FreezePolicy.from_name(self.config.freeze)

    @property
    def selectors(self) -> Sequence[str]:
        return tuple(self.config.diagnostics.selectors)
