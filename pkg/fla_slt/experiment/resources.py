"""Corpus, vocabularies and backend an experiment runs on, built once and cached on disk."""
from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import List, Tuple

from fla_slt.common.constants import MANIFEST_FILE_NAME, VOCABULARY_FILE_NAME
from fla_slt.common.exceptions import CorpusFormatError
from fla_slt.common.logger import LoggerFactory
from fla_slt.corpus.sign_video import Corpus
from fla_slt.corpus.storage import load_corpus
from fla_slt.corpus.synthetic import (
    SyntheticSpec,
    build_base_vocabulary,
    generate_monolingual_sentences,
    generate_synthetic_corpus,
)
from fla_slt.corpus.vocabulary import Vocabulary, trim_vocabulary
from fla_slt.experiment.experiment_config import ExperimentConfig
from fla_slt.models.backend import TinySeq2SeqBackend, pretrain_tiny_backend
from fla_slt.models.llm_stage import seeded_component
from fla_slt.training.checkpoint import TrainState, load_checkpoint, save_checkpoint

LOG = LoggerFactory.get_logger(__name__)

BACKEND_GROUP = "backend"


@lru_cache(maxsize=2)
def synthetic_corpus(spec: SyntheticSpec) -> Corpus:
    return generate_synthetic_corpus(spec)


def base_vocabulary(experiment: ExperimentConfig, corpus: Corpus) -> Vocabulary:
    """The backend tokenizer's vocabulary before trimming."""
    vocabulary_path = experiment.corpus_directory / VOCABULARY_FILE_NAME
    if vocabulary_path.is_file():
        return Vocabulary.load(vocabulary_path)
    if experiment.external_corpus:
        return Vocabulary.from_tokens(word for sample in corpus for word in sample.transcript.split())
    return build_base_vocabulary(experiment.synthetic_spec, experiment.config.corpus.extra_base_tokens)


def prepare_corpus(experiment: ExperimentConfig) -> Tuple[Corpus, Vocabulary, Vocabulary]:
    """(corpus, base vocabulary, trimmed vocabulary); a synthetic corpus not on disk yet is generated in memory."""
    directory = experiment.corpus_directory
    if (directory / MANIFEST_FILE_NAME).is_file():
        corpus = load_corpus(directory)
    elif experiment.external_corpus:
        raise CorpusFormatError(f"no {MANIFEST_FILE_NAME} in corpus directory {directory}")
    else:
        LOG.info(f"no corpus in {directory}, generating it in memory")
        corpus = synthetic_corpus(experiment.synthetic_spec)
    base_vocab = base_vocabulary(experiment, corpus)
    return corpus, base_vocab, trim_vocabulary(base_vocab, corpus)


def monolingual_text(experiment: ExperimentConfig, corpus: Corpus) -> Tuple[List[str], List[str]]:
    """(training sentences, held-out sentences) for denoising pretraining."""
    pretrain = experiment.pretrain_config
    if experiment.external_corpus:
        return corpus.transcripts("train"), corpus.transcripts("dev")
    spec = experiment.synthetic_spec
    return (
        generate_monolingual_sentences(spec, pretrain.sentences),
        generate_monolingual_sentences(spec, pretrain.validation_sentences, seed=spec.seed + 1),
    )


def prepare_backend(
    experiment: ExperimentConfig,
    corpus: Corpus,
    base_vocab: Vocabulary,
    vocab: Vocabulary,
    cache_directory: Path,
) -> TinySeq2SeqBackend:
    """Seeded backend over the base vocabulary, denoising-pretrained if configured, trimmed to ``vocab``."""
    config = experiment.backend_config(len(base_vocab))
    backend = seeded_component(experiment.seed, "backend", lambda: TinySeq2SeqBackend(config))
    if experiment.config.backend.pretrained:
        path = cache_directory / f"backend_{experiment.backend_hash[:12]}"
        if (path / MANIFEST_FILE_NAME).is_file():
            load_checkpoint(path, {BACKEND_GROUP: backend}, config_hash=experiment.backend_hash)
        else:
            sentences, held_out = monolingual_text(experiment, corpus)
            result = pretrain_tiny_backend(backend, sentences, base_vocab, experiment.pretrain_config, held_out)
            state = TrainState(stage="pretrain", step=len(result.losses))
            save_checkpoint(path, {BACKEND_GROUP: backend}, state, experiment.backend_hash)
    else:
        LOG.info("using a randomly initialized backend")
    return backend.trimmed(base_vocab, vocab)
