"""Pluggable seq2seq language backend and the desk-scale pretrained stand-in.

Any module that can encode externally supplied embeddings and score decoder prefixes can serve as the backend of
the fine-tuning stage. ``TinySeq2SeqBackend`` additionally owns a source word-embedding table for its native
text-to-text path, which the denoising pretext trains and the LLM-Adapter later replaces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
import torch

from fla_slt.common.config import Config
from fla_slt.common.exceptions import ConfigValidationError
from fla_slt.common.logger import LoggerFactory
from fla_slt.corpus.vocabulary import Vocabulary, tokenize
from fla_slt.models.features import FeatureSequence, Tap, length_mask
from fla_slt.models.losses import label_smoothed_ce
from fla_slt.models.transformer import EncoderDecoderTransformer, TransformerConfig

LOG = LoggerFactory.get_logger(__name__)

VOCABULARY_ROWS = ("word_embedding.weight", "source_embedding.weight", "lm_head.weight", "lm_head.bias")


@runtime_checkable
class Seq2SeqBackend(Protocol):
    @property
    def embedding_dim(self) -> int:
        ...

    @property
    def vocab_size(self) -> int:
        ...

    def encode(self, inputs: FeatureSequence) -> FeatureSequence:
        ...

    def text_decoder(self, decoder_inputs: torch.Tensor, memory: FeatureSequence) -> torch.Tensor:
        ...

    def lm_head_logprobs(self, outputs: torch.Tensor) -> torch.Tensor:
        ...

    def next_token_logprobs(self, memory: FeatureSequence, prefix: Sequence[int]) -> torch.Tensor:
        ...

    def last_layer_prefix(self) -> str:
        ...


def backend_config(config: Config, vocab_size: int) -> TransformerConfig:
    return TransformerConfig.from_config(config, vocab_size)


class TinySeq2SeqBackend(EncoderDecoderTransformer):
    def __init__(self, config: TransformerConfig) -> None:
        super().__init__(config)
        self.source_embedding = torch.nn.Embedding(config.vocab_size, config.hidden)

    def embed_source(self, ids: torch.Tensor, lengths: torch.Tensor) -> FeatureSequence:
        self.check_ids(ids)
        return FeatureSequence.masked(self.source_embedding(ids), lengths, Tap.textual)

    def forward_text(
        self, source_ids: torch.Tensor, source_lengths: torch.Tensor, decoder_inputs: torch.Tensor
    ) -> torch.Tensor:
        """Native text-to-text forward; identical to ``forward`` fed with the backend's own source embeddings."""
        return self(self.embed_source(source_ids, source_lengths), decoder_inputs)

    def trimmed(self, base_vocab: Vocabulary, vocab: Vocabulary) -> TinySeq2SeqBackend:
        """Copy restricted to ``vocab``: embedding and LM-head rows are picked by token from ``base_vocab``."""
        rows = torch.tensor([base_vocab.id_of(token) for token in vocab.tokens], dtype=torch.long)
        state = self.state_dict()
        for name in VOCABULARY_ROWS:
            state[name] = state[name][rows].clone()
        result = TinySeq2SeqBackend(self.config.with_vocab_size(len(vocab)))
        result.load_state_dict(state)
        LOG.info(f"trimmed backend vocabulary rows from {self.vocab_size} to {result.vocab_size}")
        return result


@dataclass(frozen=True)
class PretrainConfig:
    steps: int = 2000
    batch_size: int = 32
    learning_rate: float = 1e-3
    mask_probability: float = 0.15
    delete_probability: float = 0.1
    label_smoothing: float = 0.1
    sentences: int = 20000
    validation_sentences: int = 200
    seed: int = 11

    def __post_init__(self) -> None:
        if self.steps < 0 or self.batch_size < 1 or self.sentences < 1 or self.validation_sentences < 1:
            raise ConfigValidationError(f"invalid pretraining sizes: {self}")
        if self.learning_rate <= 0:
            raise ConfigValidationError(f"pretraining learning rate must be > 0, got {self.learning_rate}")
        for name in ("mask_probability", "delete_probability"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigValidationError(f"{name} must lie in [0, 1), got {getattr(self, name)}")

    @classmethod
    def from_config(cls, config: Config) -> PretrainConfig:
        return cls(
            steps=config.steps,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            mask_probability=config.mask_probability,
            delete_probability=config.delete_probability,
            label_smoothing=config.label_smoothing,
            sentences=config.sentences,
            validation_sentences=config.validation_sentences,
            seed=config.seed,
        )


@dataclass
class PretrainResult:
    losses: List[float] = field(default_factory=list)
    initial_validation_loss: float = float("nan")
    final_validation_loss: float = float("nan")


def corrupt(
    ids: Sequence[int], vocab: Vocabulary, rng: np.random.Generator, mask_probability: float, delete_probability: float
) -> List[int]:
    """Delete or replace by <unk> some content tokens of a [bos, ..., eos] sequence; at least one token survives."""
    content = list(ids[1:-1])
    kept: List[int] = []
    for token_id in content:
        draw = rng.random()
        if draw < delete_probability:
            continue
        kept.append(vocab.unk_id if draw < delete_probability + mask_probability else token_id)
    if not kept:
        kept = [content[int(rng.integers(len(content)))]]
    return [ids[0], *kept, ids[-1]]


def pad_sequences(sequences: Sequence[Sequence[int]], pad_id: int) -> Tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(sequence) for sequence in sequences], dtype=torch.long)
    padded = torch.full((len(sequences), int(lengths.max())), pad_id, dtype=torch.long)
    for index, sequence in enumerate(sequences):
        padded[index, : len(sequence)] = torch.tensor(list(sequence), dtype=torch.long)
    return padded, lengths


def reconstruction_loss(
    backend: TinySeq2SeqBackend,
    sources: Sequence[Sequence[int]],
    targets: Sequence[Sequence[int]],
    vocab: Vocabulary,
    epsilon: float,
) -> torch.Tensor:
    source_ids, source_lengths = pad_sequences(sources, vocab.pad_id)
    target_ids, target_lengths = pad_sequences(targets, vocab.pad_id)
    logprobs = backend.forward_text(source_ids, source_lengths, target_ids[:, :-1])
    mask = length_mask(target_lengths, target_ids.shape[1])[:, 1:]
    return label_smoothed_ce(logprobs, target_ids[:, 1:], mask, epsilon)


def reconstruction_accuracy(backend: TinySeq2SeqBackend, sentences: Sequence[str], vocab: Vocabulary) -> float:
    """Teacher-forced per-token accuracy of copying uncorrupted sentences."""
    sequences = [tokenize(sentence, vocab).ids for sentence in sentences]
    ids, lengths = pad_sequences(sequences, vocab.pad_id)
    was_training = backend.training
    backend.eval()
    with torch.no_grad():
        predictions = backend.forward_text(ids, lengths, ids[:, :-1]).argmax(dim=-1)
    backend.train(was_training)
    mask = length_mask(lengths, ids.shape[1])[:, 1:]
    return float((predictions == ids[:, 1:])[mask].float().mean())


def _validation_loss(
    backend: TinySeq2SeqBackend, pairs: Tuple[List[List[int]], List[List[int]]], vocab: Vocabulary, epsilon: float
) -> float:
    backend.eval()
    with torch.no_grad():
        loss = float(reconstruction_loss(backend, pairs[0], pairs[1], vocab, epsilon))
    return loss


def pretrain_tiny_backend(
    backend: TinySeq2SeqBackend,
    sentences: Sequence[str],
    vocab: Vocabulary,
    config: PretrainConfig,
    validation_sentences: Optional[Sequence[str]] = None,
) -> PretrainResult:
    """Denoising pretext on monolingual text: reconstruct each sentence from a corrupted copy.

    Trains ``backend`` in place; with ``config.steps == 0`` its parameters are left untouched.
    """
    rng = np.random.default_rng(config.seed)
    originals = [list(tokenize(sentence, vocab).ids) for sentence in sentences]
    result = PretrainResult()
    validation_pairs: Optional[Tuple[List[List[int]], List[List[int]]]] = None
    if validation_sentences:
        validation_rng = np.random.default_rng([config.seed, 1])
        validation_targets = [list(tokenize(sentence, vocab).ids) for sentence in validation_sentences]
        validation_sources = [
            corrupt(ids, vocab, validation_rng, config.mask_probability, config.delete_probability)
            for ids in validation_targets
        ]
        validation_pairs = (validation_sources, validation_targets)
        result.initial_validation_loss = _validation_loss(backend, validation_pairs, vocab, config.label_smoothing)
    if config.steps == 0:
        result.final_validation_loss = result.initial_validation_loss
        return result

    LOG.info(f"pretraining backend for {config.steps} steps on {len(originals)} sentences")
    torch.manual_seed(config.seed)
    optimizer = torch.optim.Adam(backend.parameters(), lr=config.learning_rate)
    backend.train()
    for step in range(config.steps):
        picks = rng.integers(len(originals), size=config.batch_size)
        targets = [originals[index] for index in picks]
        sources = [corrupt(ids, vocab, rng, config.mask_probability, config.delete_probability) for ids in targets]
        loss = reconstruction_loss(backend, sources, targets, vocab, config.label_smoothing)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        result.losses.append(float(loss))
        if step % 100 == 0:
            LOG.debug(f"pretraining step {step}: loss {result.losses[-1]:.4f}")

    if validation_pairs is not None:
        result.final_validation_loss = _validation_loss(backend, validation_pairs, vocab, config.label_smoothing)
        LOG.info(
            f"backend validation reconstruction loss {result.initial_validation_loss:.4f} -> "
            f"{result.final_validation_loss:.4f}"
        )
    backend.train()
    return result
