"""Composition of visual encoder, adapter and seq2seq head into one sign-to-text model.

The same composition covers all three training regimes:

* visual initialing: visual encoder -> VL-Adapter -> Light-T,
* LLM fine-tuning: frozen visual encoder -> LLM-Adapter -> pretrained backend,
* joint end-to-end: visual encoder -> LLM-Adapter -> backend, nothing frozen.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterator, Optional, Tuple, TypeVar

import torch
from torch import nn

from fla_slt.common.config import Config
from fla_slt.common.constants import LABEL_SMOOTHING
from fla_slt.common.exceptions import ConfigValidationError, FeatureTapError
from fla_slt.corpus.batch import Batch
from fla_slt.models.adapter import MlpAdapter
from fla_slt.models.features import FeatureSequence, Tap
from fla_slt.models.losses import label_smoothed_ce
from fla_slt.models.transformer import EncoderDecoderTransformer
from fla_slt.models.visual_encoder import VisualEncoder

ModuleType = TypeVar("ModuleType", bound=nn.Module)

# adapters and heads of the different regimes share an init stream, so that a Light-T-sized backend trained
# end-to-end starts from exactly the stage-1 initialization
COMPONENT_SEED_OFFSETS = {
    "visual_encoder": 0,
    "vl_adapter": 1,
    "llm_adapter": 1,
    "light_t": 2,
    "backend": 2,
}


class FeatureTap(Enum):
    frame_wise = "frame_wise"
    sign_wise = "sign_wise"
    hidden_states = "hidden_states"

    @property
    def adapter_input(self) -> Tap:
        return {
            FeatureTap.frame_wise: Tap.frame_wise,
            FeatureTap.sign_wise: Tap.sign_wise,
            FeatureTap.hidden_states: Tap.hidden,
        }[self]


@dataclass(frozen=True)
class FreezePolicy:
    backbone_frozen: bool = True
    temporal_frozen: bool = True

    @classmethod
    def from_config(cls, config: Config) -> FreezePolicy:
        return cls(backbone_frozen=config.backbone_frozen, temporal_frozen=config.temporal_frozen)

    @classmethod
    def from_name(cls, name: str) -> FreezePolicy:
        """``none``, ``vb``, ``tm`` or ``vb+tm``."""
        parts = set() if name == "none" else set(name.split("+"))
        if not parts <= {"vb", "tm"}:
            raise ConfigValidationError(f"unknown freeze policy '{name}', valid: none, vb, tm, vb+tm")
        return cls(backbone_frozen="vb" in parts, temporal_frozen="tm" in parts)

    @property
    def name(self) -> str:
        parts = [part for part, frozen in (("vb", self.backbone_frozen), ("tm", self.temporal_frozen)) if frozen]
        return "+".join(parts) or "none"


NO_FREEZE = FreezePolicy(backbone_frozen=False, temporal_frozen=False)


def seeded_component(seed: int, name: str, factory: Callable[[], ModuleType]) -> ModuleType:
    """Build a component from its own seed stream without disturbing the global generator."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed * 10 + COMPONENT_SEED_OFFSETS[name])
        return factory()


class CarriedEncoder(nn.Module):
    """Frozen stage-1 VL-Adapter + Light-T encoder producing hidden states for the hidden_states tap."""

    def __init__(self, vl_adapter: MlpAdapter, light_t: EncoderDecoderTransformer) -> None:
        super().__init__()
        self.vl_adapter = vl_adapter
        self.light_t = light_t

    @property
    def out_dim(self) -> int:
        return self.light_t.embedding_dim

    def forward(self, features: FeatureSequence) -> FeatureSequence:
        return self.light_t.encode(self.vl_adapter(features))


class SignToTextModel(nn.Module):
    def __init__(
        self,
        visual_encoder: VisualEncoder,
        adapter: MlpAdapter,
        backend: EncoderDecoderTransformer,
        tap: FeatureTap = FeatureTap.sign_wise,
        carried: Optional[CarriedEncoder] = None,
        group_names: Tuple[str, str] = ("llm_adapter", "backend"),
    ) -> None:
        super().__init__()
        if tap is FeatureTap.hidden_states and carried is None:
            raise FeatureTapError("the hidden_states tap needs a retained stage-1 Light-T encoder")
        if adapter.input_tap is not tap.adapter_input:
            raise FeatureTapError(f"adapter consumes {adapter.input_tap.value} features, tap is {tap.value}")
        if adapter.out_dim != backend.embedding_dim:
            raise ConfigValidationError(
                f"adapter width {adapter.out_dim} does not fit backend embedding width {backend.embedding_dim}"
            )
        self.visual_encoder = visual_encoder
        self.adapter = adapter
        self.backend = backend
        self.carried = carried
        self.tap = tap
        self.group_names = group_names
        self.freeze_policy = NO_FREEZE

    def component_groups(self) -> Dict[str, nn.Module]:
        adapter_name, backend_name = self.group_names
        groups: Dict[str, nn.Module] = {
            "visual_encoder": self.visual_encoder,
            adapter_name: self.adapter,
            backend_name: self.backend,
        }
        if self.carried is not None:
            groups["vl_adapter"] = self.carried.vl_adapter
            groups["light_t"] = self.carried.light_t
        return groups

    def frozen_modules(self) -> Iterator[nn.Module]:
        if self.freeze_policy.backbone_frozen:
            yield self.visual_encoder.backbone
        if self.freeze_policy.temporal_frozen:
            yield self.visual_encoder.temporal
        if self.carried is not None:
            yield self.carried

    def train(self, mode: bool = True) -> SignToTextModel:
        super().train(mode)
        for module in self.frozen_modules():
            module.eval()
        return self

    def source_features(self, videos: torch.Tensor, lengths: torch.Tensor) -> FeatureSequence:
        taps = self.visual_encoder.taps(videos, lengths)
        if self.tap is FeatureTap.frame_wise:
            return taps[Tap.frame_wise]
        if self.tap is FeatureTap.sign_wise:
            return taps[Tap.sign_wise]
        if self.carried is None:
            raise FeatureTapError("the hidden_states tap needs a retained stage-1 Light-T encoder")
        return self.carried(taps[Tap.sign_wise])

    def encode(self, videos: torch.Tensor, lengths: torch.Tensor) -> FeatureSequence:
        """Backend encoder memory for a padded video batch."""
        return self.backend.encode(self.adapter(self.source_features(videos, lengths)))

    def forward(self, videos: torch.Tensor, lengths: torch.Tensor, decoder_inputs: torch.Tensor) -> torch.Tensor:
        memory = self.encode(videos, lengths)
        return self.backend.lm_head_logprobs(self.backend.text_decoder(decoder_inputs, memory))


def apply_freeze(model: SignToTextModel, policy: FreezePolicy) -> SignToTextModel:
    """Disable gradients on the frozen parts and pin their normalization statistics (eval mode)."""
    model.freeze_policy = policy
    for parameter in model.parameters():
        parameter.requires_grad_(True)
    for module in model.frozen_modules():
        module.requires_grad_(False)
    model.train(model.training)
    return model


def parameter_checksum(module: nn.Module) -> str:
    """SHA-256 over the full state dict, normalization running statistics included."""
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def frozen_checksum(model: SignToTextModel) -> str:
    return parameter_checksum(nn.ModuleList(model.frozen_modules()))


def finetune_forward(model: SignToTextModel, batch: Batch, epsilon: float = LABEL_SMOOTHING) -> torch.Tensor:
    logprobs = model(batch.videos, batch.frame_lengths, batch.decoder_inputs)
    return label_smoothed_ce(logprobs, batch.decoder_targets, batch.decoder_target_mask, epsilon)


def adapter_input_dim(visual_encoder: VisualEncoder, tap: FeatureTap, carried: Optional[CarriedEncoder]) -> int:
    if tap is FeatureTap.frame_wise:
        return visual_encoder.frame_feature_dim
    if tap is FeatureTap.sign_wise:
        return visual_encoder.feature_dim
    if carried is None:
        raise FeatureTapError("the hidden_states tap needs a retained stage-1 Light-T encoder")
    return carried.out_dim


def build_stage1_model(
    visual_encoder_factory: Callable[[], VisualEncoder],
    light_t_factory: Callable[[], EncoderDecoderTransformer],
    seed: int,
) -> SignToTextModel:
    visual_encoder = seeded_component(seed, "visual_encoder", visual_encoder_factory)
    light_t = seeded_component(seed, "light_t", light_t_factory)
    vl_adapter = seeded_component(
        seed,
        "vl_adapter",
        lambda: MlpAdapter(visual_encoder.feature_dim, light_t.embedding_dim, Tap.sign_wise),
    )
    return SignToTextModel(visual_encoder, vl_adapter, light_t, group_names=("vl_adapter", "light_t"))


def build_finetune_model(
    visual_encoder: VisualEncoder,
    backend: EncoderDecoderTransformer,
    tap: FeatureTap,
    seed: int,
    carried: Optional[CarriedEncoder] = None,
    adapter_hidden_dim: Optional[int] = None,
) -> SignToTextModel:
    """Fresh LLM-Adapter between an existing visual encoder and backend (stage 2 and joint training)."""
    in_dim = adapter_input_dim(visual_encoder, tap, carried)
    llm_adapter = seeded_component(
        seed,
        "llm_adapter",
        lambda: MlpAdapter(in_dim, backend.embedding_dim, tap.adapter_input, adapter_hidden_dim),
    )
    return SignToTextModel(visual_encoder, llm_adapter, backend, tap=tap, carried=carried)
