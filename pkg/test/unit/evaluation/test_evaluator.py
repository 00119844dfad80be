import json
from pathlib import Path
from typing import Tuple

import pytest
import torch
from test.utils.tiny_models import tiny_finetune_model

from fla_slt.common.constants import HYPOTHESES_FILE_NAME, REPORT_FILE_NAME
from fla_slt.common.exceptions import CheckpointError
from fla_slt.corpus.sign_video import Corpus
from fla_slt.corpus.vocabulary import Vocabulary
from fla_slt.evaluation.evaluator import evaluate_model, score_hypotheses
from fla_slt.models.llm_stage import SignToTextModel


@pytest.fixture()
def vocab(tiny_vocabularies: Tuple[Vocabulary, Vocabulary]) -> Vocabulary:
    return tiny_vocabularies[1]


@pytest.fixture()
def model(vocab: Vocabulary) -> SignToTextModel:
    torch.manual_seed(0)
    return tiny_finetune_model(len(vocab))


def test_perfect_hypotheses_score_one() -> None:
    report = score_hypotheses(["s1", "s2"], ["a b c d", "d c b a"], ["a b c d", "d c b a"], "ckpt", "cfg")
    assert report.metrics() == {
        "bleu1": 1.0,
        "bleu2": 1.0,
        "bleu3": 1.0,
        "bleu4": 1.0,
        "rouge_l": 1.0,
        "n_samples": 2,
        "checkpoint_hash": "ckpt",
        "config_hash": "cfg",
    }


def test_report_files(tmp_path: Path) -> None:
    report = score_hypotheses(["s1"], ["a b"], ["a c"])
    report.write(tmp_path / "eval")
    assert json.loads((tmp_path / "eval" / REPORT_FILE_NAME).read_text())["rouge_l"] == pytest.approx(0.5)
    assert (tmp_path / "eval" / HYPOTHESES_FILE_NAME).read_text() == "sample_id\thypothesis\treference\ns1\ta b\ta c\n"


def test_evaluation_is_deterministic(model: SignToTextModel, tiny_corpus: Corpus, vocab: Vocabulary) -> None:
    model.train()
    first = evaluate_model(model, tiny_corpus.dev, vocab, beam=2, max_len=6)
    second = evaluate_model(model, tiny_corpus.dev, vocab, beam=2, max_len=6, workers=2)
    assert model.training
    assert first.n_samples == len(tiny_corpus.dev)
    assert first.hypotheses == second.hypotheses
    assert first.metrics() == second.metrics()
    assert [row[0] for row in first.hypotheses] == [sample.sample_id for sample in tiny_corpus.dev]
    assert all(len(hypothesis.split()) <= 5 for _, hypothesis, _ in first.hypotheses)


def test_vocabulary_must_fit_the_backend(model: SignToTextModel, tiny_corpus: Corpus) -> None:
    with pytest.raises(CheckpointError):
        evaluate_model(model, tiny_corpus.dev, Vocabulary.from_tokens(["only"]))


def test_written_reports_are_byte_identical(
    tmp_path: Path, model: SignToTextModel, tiny_corpus: Corpus, vocab: Vocabulary
) -> None:
    for workers, directory in ((1, "first"), (2, "second")):
        report = evaluate_model(model, tiny_corpus.test, vocab, beam=3, max_len=6, workers=workers, config_hash="cfg")
        report.write(tmp_path / directory)
    for name in (REPORT_FILE_NAME, HYPOTHESES_FILE_NAME):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
