from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Sequence, Tuple

import torch
from torch import nn

from fla_slt.common.config import Config
from fla_slt.common.exceptions import ConfigValidationError, ShapeError, VocabularyError
from fla_slt.models.features import FeatureSequence, Tap

# (layers, heads, hidden, ffn)
LIGHT_T_PRESETS: Dict[str, Tuple[int, int, int, int]] = {
    "tiny": (1, 4, 256, 1024),
    "small": (2, 4, 512, 2048),
    "base": (3, 8, 512, 2048),
    "large": (4, 8, 1024, 4096),
}


@dataclass(frozen=True)
class TransformerConfig:
    layers: int
    heads: int
    hidden: int
    ffn: int
    vocab_size: int
    max_positions: int = 512
    dropout: float = 0.1

    def __post_init__(self) -> None:
        for name in ("layers", "heads", "hidden", "ffn", "vocab_size", "max_positions"):
            if getattr(self, name) < 1:
                raise ConfigValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden % self.heads:
            raise ConfigValidationError(f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigValidationError(f"dropout must lie in [0, 1), got {self.dropout}")

    @classmethod
    def from_config(cls, config: Config, vocab_size: int) -> TransformerConfig:
        """Either a named ``preset`` or explicit ``layers/heads/hidden/ffn``."""
        if config.get("preset") is not None:
            return build_light_t(config.preset, vocab_size, config.max_positions, config.dropout)
        return cls(
            layers=config.layers,
            heads=config.heads,
            hidden=config.hidden,
            ffn=config.ffn,
            vocab_size=vocab_size,
            max_positions=config.max_positions,
            dropout=config.dropout,
        )

    def with_vocab_size(self, vocab_size: int) -> TransformerConfig:
        return replace(self, vocab_size=vocab_size)


LightTConfig = TransformerConfig


def build_light_t(preset: str, vocab_size: int, max_positions: int = 512, dropout: float = 0.1) -> TransformerConfig:
    if preset not in LIGHT_T_PRESETS:
        raise ConfigValidationError(f"unknown Light-T preset '{preset}', valid presets: {sorted(LIGHT_T_PRESETS)}")
    layers, heads, hidden, ffn = LIGHT_T_PRESETS[preset]
    return TransformerConfig(layers, heads, hidden, ffn, vocab_size, max_positions, dropout)


def sinusoidal_table(max_positions: int, dim: int) -> torch.Tensor:
    positions = torch.arange(max_positions, dtype=torch.float64)[:, None]
    rates = torch.pow(10000.0, -torch.arange(0, dim, 2, dtype=torch.float64) / dim)
    table = torch.zeros((max_positions, dim), dtype=torch.float64)
    table[:, 0::2] = torch.sin(positions * rates)
    table[:, 1::2] = torch.cos(positions * rates)[:, : dim // 2]
    return table.to(torch.get_default_dtype())


def positional_encoding(position: int, dim: int, max_positions: int = 512) -> torch.Tensor:
    """Component 2k = sin(pos / 10000^(2k/D)), component 2k+1 = cos(pos / 10000^(2k/D))."""
    if not 0 <= position < max_positions:
        raise ShapeError(f"position {position} outside [0, {max_positions})")
    rates = torch.pow(10000.0, -torch.arange(0, dim, 2, dtype=torch.float64) / dim)
    encoding = torch.zeros(dim, dtype=torch.float64)
    encoding[0::2] = torch.sin(position * rates)
    encoding[1::2] = torch.cos(position * rates)[: dim // 2]
    return encoding.to(torch.get_default_dtype())


def causal_mask(width: int, device: torch.device) -> torch.Tensor:
    """True above the diagonal: position i may not attend to j > i."""
    return torch.triu(torch.ones((width, width), dtype=torch.bool, device=device), diagonal=1)


class EncoderDecoderTransformer(nn.Module):
    """Pre-norm encoder-decoder transformer taking dense source embeddings.

    Used as the Light-T translation head and as the base of the seq2seq backend. The LM head is not tied to the
    target word-embedding table.
    """

    def __init__(self, config: TransformerConfig) -> None:
        super().__init__()
        self.config = config
        self.register_buffer("positions", sinusoidal_table(config.max_positions, config.hidden), persistent=False)
        self.input_dropout = nn.Dropout(config.dropout)
        encoder_layer = nn.TransformerEncoderLayer(
            config.hidden, config.heads, config.ffn, config.dropout, batch_first=True, norm_first=True
        )
        self.encoder = nn.TransformerEncoder(
            encoder_layer, config.layers, norm=nn.LayerNorm(config.hidden), enable_nested_tensor=False
        )
        decoder_layer = nn.TransformerDecoderLayer(
            config.hidden, config.heads, config.ffn, config.dropout, batch_first=True, norm_first=True
        )
        self.decoder = nn.TransformerDecoder(decoder_layer, config.layers, norm=nn.LayerNorm(config.hidden))
        self.word_embedding = nn.Embedding(config.vocab_size, config.hidden)
        self.lm_head = nn.Linear(config.hidden, config.vocab_size)

    @property
    def embedding_dim(self) -> int:
        return self.config.hidden

    @property
    def vocab_size(self) -> int:
        return self.config.vocab_size

    def add_positions(self, values: torch.Tensor) -> torch.Tensor:
        count = values.shape[1]
        if count > self.config.max_positions:
            raise ShapeError(f"sequence of length {count} exceeds max_positions {self.config.max_positions}")
        return values + self.positions[:count].to(values.dtype)

    def text_encoder(self, values: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if values.dim() != 3 or values.shape[-1] != self.config.hidden:
            raise ShapeError(f"encoder input must be (B, N, {self.config.hidden}), got {tuple(values.shape)}")
        if mask.shape != values.shape[:2]:
            raise ShapeError(f"mask {tuple(mask.shape)} does not match encoder input {tuple(values.shape[:2])}")
        if not bool(mask.any(dim=1).all()):
            raise ShapeError("every encoder input needs at least one unmasked step")
        hidden = self.encoder(self.input_dropout(self.add_positions(values)), src_key_padding_mask=~mask)
        return hidden * mask.unsqueeze(-1).to(hidden.dtype)

    def encode(self, inputs: FeatureSequence) -> FeatureSequence:
        inputs.expect(Tap.textual, self.config.hidden)
        return FeatureSequence(self.text_encoder(inputs.values, inputs.mask), inputs.lengths, Tap.hidden)

    def check_ids(self, ids: torch.Tensor) -> None:
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.config.vocab_size):
            raise VocabularyError(
                f"token ids must lie in [0, {self.config.vocab_size}), got [{int(ids.min())}, {int(ids.max())}]"
            )

    def embed_targets(self, ids: torch.Tensor) -> torch.Tensor:
        """z_i = WEL(o_i) + PE(i) for (B, L) ids."""
        self.check_ids(ids)
        return self.add_positions(self.word_embedding(ids))

    def text_decoder(self, decoder_inputs: torch.Tensor, memory: FeatureSequence) -> torch.Tensor:
        memory.expect(Tap.hidden, self.config.hidden)
        if memory.values.shape[1] == 0 or int(memory.lengths.min()) < 1:
            raise ShapeError("the decoder needs a non-empty encoder memory")
        targets = self.input_dropout(self.embed_targets(decoder_inputs))
        return self.decoder(
            targets,
            memory.values,
            tgt_mask=causal_mask(decoder_inputs.shape[1], decoder_inputs.device),
            memory_key_padding_mask=~memory.mask,
        )

    def lm_head_logprobs(self, outputs: torch.Tensor) -> torch.Tensor:
        return torch.log_softmax(self.lm_head(outputs), dim=-1)

    def forward(self, source: FeatureSequence, decoder_inputs: torch.Tensor) -> torch.Tensor:
        return self.lm_head_logprobs(self.text_decoder(decoder_inputs, self.encode(source)))

    def next_token_logprobs(self, memory: FeatureSequence, prefix: Sequence[int]) -> torch.Tensor:
        ids = torch.tensor([list(prefix)], dtype=torch.long, device=memory.values.device)
        return self.lm_head_logprobs(self.text_decoder(ids, memory))[0, -1]

    def last_layer_prefix(self) -> str:
        return f"decoder.layers.{self.config.layers - 1}"


def parameter_count(module: nn.Module) -> int:
    return sum(parameter.numel() for parameter in module.parameters())
