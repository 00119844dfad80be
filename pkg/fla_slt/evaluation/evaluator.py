from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import torch

from fla_slt.common.constants import BEAM_SIZE, HYPOTHESES_FILE_NAME, REPORT_FILE_NAME
from fla_slt.common.exceptions import CheckpointError
from fla_slt.common.logger import LoggerFactory
from fla_slt.corpus.sign_video import SignVideo
from fla_slt.corpus.vocabulary import Vocabulary, detokenize
from fla_slt.evaluation.beam_search import TranslationHypothesis, beam_search, greedy_decode
from fla_slt.evaluation.metrics import bleu, rouge_l
from fla_slt.models.llm_stage import SignToTextModel

LOG = LoggerFactory.get_logger(__name__)


@dataclass
class EvalReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rouge_l: float
    n_samples: int
    checkpoint_hash: str = ""
    config_hash: str = ""
    # (sample_id, hypothesis, reference)
    hypotheses: List[Tuple[str, str, str]] = field(default_factory=list)

    def metrics(self) -> Dict[str, Any]:
        return {
            "bleu1": self.bleu1,
            "bleu2": self.bleu2,
            "bleu3": self.bleu3,
            "bleu4": self.bleu4,
            "rouge_l": self.rouge_l,
            "n_samples": self.n_samples,
            "checkpoint_hash": self.checkpoint_hash,
            "config_hash": self.config_hash,
        }

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / REPORT_FILE_NAME, "w", encoding="utf-8") as report_file:
            json.dump(self.metrics(), report_file, sort_keys=True, indent=2)
            report_file.write("\n")
        with open(directory / HYPOTHESES_FILE_NAME, "w", newline="", encoding="utf-8") as hypotheses_file:
            writer = csv.writer(hypotheses_file, delimiter="\t", lineterminator="\n")
            writer.writerow(["sample_id", "hypothesis", "reference"])
            writer.writerows(self.hypotheses)
        LOG.info(f"wrote evaluation report to {directory / REPORT_FILE_NAME}")
        return directory / REPORT_FILE_NAME


def score_hypotheses(
    sample_ids: Sequence[str],
    hypotheses: Sequence[str],
    references: Sequence[str],
    checkpoint_hash: str = "",
    config_hash: str = "",
) -> EvalReport:
    bleu1, bleu2, bleu3, bleu4 = bleu(hypotheses, references, max_n=4)
    return EvalReport(
        bleu1=bleu1,
        bleu2=bleu2,
        bleu3=bleu3,
        bleu4=bleu4,
        rouge_l=rouge_l(hypotheses, references),
        n_samples=len(hypotheses),
        checkpoint_hash=checkpoint_hash,
        config_hash=config_hash,
        hypotheses=list(zip(sample_ids, hypotheses, references)),
    )


def translate(
    model: SignToTextModel, sample: SignVideo, vocab: Vocabulary, beam: int = BEAM_SIZE, max_len: int = 32
) -> TranslationHypothesis:
    video = torch.from_numpy(sample.frames).unsqueeze(0)
    with torch.no_grad():
        memory = model.encode(video, torch.tensor([sample.frame_count]))

        def score_fn(prefix: Sequence[int]) -> torch.Tensor:
            return model.backend.next_token_logprobs(memory, prefix)

        if beam == 1:
            return greedy_decode(score_fn, max_len, vocab.bos_id, vocab.eos_id)
        return beam_search(score_fn, beam, max_len, vocab.bos_id, vocab.eos_id)


def evaluate_model(
    model: SignToTextModel,
    samples: Sequence[SignVideo],
    vocab: Vocabulary,
    beam: int = BEAM_SIZE,
    max_len: int = 32,
    checkpoint_hash: str = "",
    workers: int = 1,
    config_hash: str = "",
) -> EvalReport:
    """Decode every sample, detokenize and score against the transcripts."""
    if model.backend.vocab_size != len(vocab):
        raise CheckpointError(
            f"backend scores {model.backend.vocab_size} tokens but the vocabulary holds {len(vocab)}"
        )
    was_training = model.training
    model.eval()

    def _decode(sample: SignVideo) -> str:
        return detokenize(translate(model, sample, vocab, beam, max_len).ids, vocab)

    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                hypotheses = list(executor.map(_decode, samples))
        else:
            hypotheses = [_decode(sample) for sample in samples]
    finally:
        model.train(was_training)
    report = score_hypotheses(
        [sample.sample_id for sample in samples],
        hypotheses,
        [sample.transcript for sample in samples],
        checkpoint_hash,
        config_hash,
    )
    LOG.info(f"evaluated {report.n_samples} samples: BLEU-4 {report.bleu4:.4f}, ROUGE-L {report.rouge_l:.4f}")
    return report
