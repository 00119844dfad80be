import numpy as np
import pytest

from fla_slt.common.config import Config
from fla_slt.common.exceptions import ConfigValidationError
from fla_slt.corpus.sign_video import Corpus
from fla_slt.corpus.synthetic import (
    SyntheticSpec,
    build_base_vocabulary,
    corpus_statistics,
    generate_monolingual_sentences,
    generate_synthetic_corpus,
    glyph_patterns,
    glyph_successors,
    shift_image,
)


def test_split_sizes(tiny_spec: SyntheticSpec, tiny_corpus: Corpus) -> None:
    assert (len(tiny_corpus.train), len(tiny_corpus.dev), len(tiny_corpus.test)) == tiny_spec.counts
    assert len({sample.sample_id for sample in tiny_corpus}) == len(tiny_corpus)


def test_generation_is_deterministic(tiny_spec: SyntheticSpec, tiny_corpus: Corpus) -> None:
    again = generate_synthetic_corpus(tiny_spec, workers=2)
    for first, second in zip(tiny_corpus, again):
        assert first.transcript == second.transcript
        np.testing.assert_array_equal(first.frames, second.frames)


def test_samples_follow_the_spec(tiny_spec: SyntheticSpec, tiny_corpus: Corpus) -> None:
    minimum, maximum = tiny_spec.sentence_length_range
    for sample in tiny_corpus:
        words = sample.transcript.split()
        assert minimum <= len(words) <= maximum
        assert set(words) <= set(tiny_spec.glyph_names)
        assert sample.frame_count == len(words) * tiny_spec.frames_per_glyph
        assert sample.image_size == tiny_spec.image_size
        assert set(np.unique(sample.frames)) <= {0.0, 1.0}


def test_transcripts_follow_the_grammar(tiny_spec: SyntheticSpec, tiny_corpus: Corpus) -> None:
    successors = glyph_successors(tiny_spec)
    names = tiny_spec.glyph_names
    for sample in tiny_corpus:
        glyphs = [names.index(word) for word in sample.transcript.split()]
        for current, following in zip(glyphs, glyphs[1:]):
            assert following in successors[current]


def test_glyph_patterns_are_distinct(tiny_spec: SyntheticSpec) -> None:
    patterns = glyph_patterns(tiny_spec)
    assert patterns.shape == (tiny_spec.glyph_vocab_size, *tiny_spec.image_size)
    assert len({pattern.tobytes() for pattern in patterns}) == tiny_spec.glyph_vocab_size


def test_another_seed_gives_another_corpus(tiny_spec: SyntheticSpec, tiny_corpus: Corpus) -> None:
    spec = SyntheticSpec(**{**tiny_spec.__dict__, "seed": tiny_spec.seed + 1})
    other = generate_synthetic_corpus(spec)
    assert [sample.transcript for sample in other] != [sample.transcript for sample in tiny_corpus]


@pytest.mark.parametrize(
    "field, value",
    [
        ("glyph_vocab_size", 0),
        ("sentence_length_range", (4, 2)),
        ("frames_per_glyph", 0),
        ("jitter", -1),
        ("image_size", (4, 4)),
        ("counts", (10, 0, 1)),
    ],
)
def test_invalid_spec(field: str, value: object) -> None:
    with pytest.raises(ConfigValidationError) as error:
        SyntheticSpec(**{field: value})  # type: ignore
    assert field in str(error.value)


def test_spec_from_config() -> None:
    config = Config(
        {
            "glyph_vocab_size": 5,
            "sentence_length_range": [1, 2],
            "frames_per_glyph": 3,
            "jitter": 0,
            "image_size": [8, 8],
            "counts": [3, 1, 1],
            "seed": 1,
            "successors_per_glyph": 2,
            "extra_base_tokens": 0,
        }
    )
    spec = SyntheticSpec.from_config(config)
    assert spec.sentence_length_range == (1, 2)
    assert spec.counts == (3, 1, 1)


@pytest.mark.parametrize("dy, dx", [(0, 0), (1, -2), (-3, 3)])
def test_shift_image(dy: int, dx: int) -> None:
    image = np.zeros((8, 8), dtype=np.float32)
    image[4, 4] = 1.0
    shifted = shift_image(image, dy, dx)
    assert shifted[4 + dy, 4 + dx] == 1.0
    assert shifted.sum() == 1.0


def test_monolingual_sentences(tiny_spec: SyntheticSpec) -> None:
    sentences = generate_monolingual_sentences(tiny_spec, 20)
    assert sentences == generate_monolingual_sentences(tiny_spec, 20)
    assert sentences != generate_monolingual_sentences(tiny_spec, 20, seed=tiny_spec.seed + 1)
    assert all(set(sentence.split()) <= set(tiny_spec.glyph_names) for sentence in sentences)


def test_base_vocabulary_holds_glyphs_and_distractors(tiny_spec: SyntheticSpec) -> None:
    vocab = build_base_vocabulary(tiny_spec, extra_tokens=5)
    assert len(vocab) == 4 + tiny_spec.glyph_vocab_size + 5
    assert all(name in vocab for name in tiny_spec.glyph_names)


def test_corpus_statistics(tiny_spec: SyntheticSpec, tiny_corpus: Corpus) -> None:
    statistics = corpus_statistics(tiny_corpus)
    mean_length = statistics["train_mean_transcript_length"]
    assert statistics["train_mean_frames"] == pytest.approx(mean_length * tiny_spec.frames_per_glyph)
