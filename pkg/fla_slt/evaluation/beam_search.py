from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import torch

from fla_slt.common.constants import BEAM_SIZE
from fla_slt.common.exceptions import DecodingError

ScoreFunction = Callable[[Sequence[int]], Union[torch.Tensor, Sequence[float]]]


@dataclass(frozen=True)
class TranslationHypothesis:
    ids: Tuple[int, ...]
    score: float
    finished: bool

    @property
    def length(self) -> int:
        """Generated tokens, bos excluded."""
        return len(self.ids) - 1

    @property
    def normalized_score(self) -> float:
        return self.score / self.length


def _check_arguments(beam: int, max_len: int) -> None:
    if beam < 1:
        raise DecodingError(f"beam width must be >= 1, got {beam}")
    if max_len < 2:
        raise DecodingError(f"max_len counts bos and must be >= 2, got {max_len}")


def _logprobs(score_fn: ScoreFunction, prefix: Sequence[int]) -> List[float]:
    scores = score_fn(prefix)
    if isinstance(scores, torch.Tensor):
        return [float(value) for value in scores.detach().double().tolist()]
    return [float(value) for value in scores]


def _ranking_key(hypothesis: TranslationHypothesis, normalize: bool) -> float:
    return hypothesis.normalized_score if normalize else hypothesis.score


def best_of(pool: Sequence[TranslationHypothesis], normalize: bool = True) -> TranslationHypothesis:
    """Highest (length-normalized) score; the earliest retired hypothesis wins ties."""
    best = pool[0]
    for hypothesis in pool[1:]:
        if _ranking_key(hypothesis, normalize) > _ranking_key(best, normalize):
            best = hypothesis
    return best


def beam_search(
    score_fn: ScoreFunction,
    beam: int = BEAM_SIZE,
    max_len: int = 32,
    bos: int = 1,
    eos: int = 2,
    normalize: bool = True,
) -> TranslationHypothesis:
    """Expand every live hypothesis by every token, keep the ``beam`` best by accumulated log-probability.

    Kept candidates that end in eos or reach ``max_len`` ids (bos included) retire to the pool; the search ends
    when no live hypothesis is left. Equal scores keep expansion order (earlier hypothesis, lower token id).
    """
    _check_arguments(beam, max_len)
    live = [TranslationHypothesis((bos,), 0.0, False)]
    pool: List[TranslationHypothesis] = []
    while live:
        candidates: List[TranslationHypothesis] = []
        for hypothesis in live:
            for token, logprob in enumerate(_logprobs(score_fn, hypothesis.ids)):
                if logprob == -math.inf:
                    continue
                ids = (*hypothesis.ids, token)
                finished = token == eos or len(ids) >= max_len
                candidates.append(TranslationHypothesis(ids, hypothesis.score + logprob, finished))
        if not candidates:
            break
        candidates.sort(key=lambda candidate: -candidate.score)
        kept = candidates[:beam]
        pool.extend(candidate for candidate in kept if candidate.finished)
        live = [candidate for candidate in kept if not candidate.finished]
    if not pool:
        raise DecodingError("beam search finished without any complete hypothesis")
    return best_of(pool, normalize)


def greedy_decode(score_fn: ScoreFunction, max_len: int = 32, bos: int = 1, eos: int = 2) -> TranslationHypothesis:
    """Always take the most probable next token (lowest id on ties)."""
    _check_arguments(1, max_len)
    ids: Tuple[int, ...] = (bos,)
    score = 0.0
    while True:
        logprobs = _logprobs(score_fn, ids)
        token = max(range(len(logprobs)), key=lambda index: (logprobs[index], -index))
        if logprobs[token] == -math.inf:
            raise DecodingError("greedy decoding hit a prefix without any possible continuation")
        ids = (*ids, token)
        score += logprobs[token]
        if token == eos or len(ids) >= max_len:
            return TranslationHypothesis(ids, score, True)
