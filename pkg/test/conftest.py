from pathlib import Path
from typing import TYPE_CHECKING, Tuple

import pytest

if TYPE_CHECKING:
    from fla_slt.corpus.sign_video import Corpus
    from fla_slt.corpus.synthetic import SyntheticSpec
    from fla_slt.corpus.vocabulary import Vocabulary


def pytest_configure() -> None:
    """
    Allows plugins and conftest files to perform initial configuration.
    This hook is called for every plugin and initial conftest
    file after command line options have been parsed.
    """
    from fla_slt.common.logger import LoggerFactory

    if not LoggerFactory.is_instantiated():
        LoggerFactory(Path.cwd() / "runs/log", "FlaSlt_test", development_mode=True)


@pytest.fixture(scope="session")
def tiny_spec() -> "SyntheticSpec":
    from fla_slt.corpus.synthetic import SyntheticSpec

    return SyntheticSpec(
        glyph_vocab_size=6,
        sentence_length_range=(2, 4),
        frames_per_glyph=2,
        jitter=1,
        image_size=(16, 16),
        counts=(12, 4, 4),
        seed=3,
        successors_per_glyph=3,
    )


@pytest.fixture(scope="session")
def tiny_corpus(tiny_spec: "SyntheticSpec") -> "Corpus":
    from fla_slt.corpus.synthetic import generate_synthetic_corpus

    return generate_synthetic_corpus(tiny_spec)


@pytest.fixture(scope="session")
def tiny_vocabularies(tiny_spec: "SyntheticSpec", tiny_corpus: "Corpus") -> Tuple["Vocabulary", "Vocabulary"]:
    """(base vocabulary, trimmed vocabulary)"""
    from fla_slt.corpus.synthetic import build_base_vocabulary
    from fla_slt.corpus.vocabulary import trim_vocabulary

    base_vocab = build_base_vocabulary(tiny_spec, extra_tokens=5)
    return base_vocab, trim_vocabulary(base_vocab, tiny_corpus)
