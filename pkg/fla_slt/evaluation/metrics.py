"""Corpus BLEU-1..4 and ROUGE-L on whitespace-tokenized text."""
from __future__ import annotations

import math
from collections import Counter
from typing import List, Sequence, Tuple, Union

from fla_slt.common.exceptions import MetricError

Text = Union[str, Sequence[str]]


def tokens_of(text: Text) -> List[str]:
    return text.split() if isinstance(text, str) else list(text)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[index : index + n]) for index in range(len(tokens) - n + 1))


def _check_corpus(hypotheses: Sequence[Text], references: Sequence[Text]) -> None:
    if len(hypotheses) != len(references):
        raise MetricError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    if not hypotheses:
        raise MetricError("cannot score an empty corpus")


def clipped_counts(hypothesis: Sequence[str], reference: Sequence[str], n: int) -> Tuple[int, int]:
    """(matches clipped by the reference counts, hypothesis n-gram total) for order n."""
    hypothesis_ngrams = ngrams(hypothesis, n)
    reference_ngrams = ngrams(reference, n)
    matches = sum(min(count, reference_ngrams[gram]) for gram, count in hypothesis_ngrams.items())
    return matches, sum(hypothesis_ngrams.values())


def brevity_penalty(hypothesis_length: int, reference_length: int) -> float:
    if hypothesis_length == 0:
        return 0.0
    return math.exp(min(0.0, 1.0 - reference_length / hypothesis_length))


def _geometric_means(precisions: Sequence[float]) -> List[float]:
    """BLEU-n without brevity penalty for n = 1..len(precisions); a zero precision zeroes all higher orders."""
    scores: List[float] = []
    log_sum = 0.0
    for order, precision in enumerate(precisions, start=1):
        if precision <= 0.0 or (scores and scores[-1] == 0.0):
            scores.append(0.0)
            continue
        log_sum += math.log(precision)
        scores.append(math.exp(log_sum / order))
    return scores


def bleu(hypotheses: Sequence[Text], references: Sequence[Text], max_n: int = 4) -> List[float]:
    """Corpus-level BLEU-1..BLEU-max_n: summed clipped n-gram counts, uniform weights, no smoothing."""
    _check_corpus(hypotheses, references)
    if max_n < 1:
        raise MetricError(f"max_n must be >= 1, got {max_n}")
    matches = [0] * max_n
    totals = [0] * max_n
    hypothesis_length = reference_length = 0
    for hypothesis_text, reference_text in zip(hypotheses, references):
        hypothesis, reference = tokens_of(hypothesis_text), tokens_of(reference_text)
        hypothesis_length += len(hypothesis)
        reference_length += len(reference)
        for n in range(1, max_n + 1):
            matched, total = clipped_counts(hypothesis, reference, n)
            matches[n - 1] += matched
            totals[n - 1] += total
    precisions = [matched / total if total else 0.0 for matched, total in zip(matches, totals)]
    penalty = brevity_penalty(hypothesis_length, reference_length)
    return [penalty * score for score in _geometric_means(precisions)]


def sentence_bleu(hypothesis: Text, reference: Text, max_n: int = 4) -> float:
    """BLEU-max_n of one pair with add-one smoothed precisions; for debugging only."""
    hypothesis_tokens, reference_tokens = tokens_of(hypothesis), tokens_of(reference)
    precisions = []
    for n in range(1, max_n + 1):
        matched, total = clipped_counts(hypothesis_tokens, reference_tokens, n)
        precisions.append((matched + 1) / (total + 1))
    penalty = brevity_penalty(len(hypothesis_tokens), len(reference_tokens))
    return penalty * _geometric_means(precisions)[-1]


def lcs_length(first: Sequence[str], second: Sequence[str]) -> int:
    previous = [0] * (len(second) + 1)
    for first_token in first:
        current = [0]
        for index, second_token in enumerate(second):
            if first_token == second_token:
                current.append(previous[index] + 1)
            else:
                current.append(max(previous[index + 1], current[index]))
        previous = current
    return previous[-1]


def rouge_l_pair(hypothesis: Text, reference: Text) -> float:
    hypothesis_tokens, reference_tokens = tokens_of(hypothesis), tokens_of(reference)
    common = lcs_length(hypothesis_tokens, reference_tokens)
    if common == 0:
        return 0.0
    precision = common / len(hypothesis_tokens)
    recall = common / len(reference_tokens)
    return 2 * precision * recall / (precision + recall)


def rouge_l(hypotheses: Sequence[Text], references: Sequence[Text]) -> float:
    """Mean LCS-based F1 over samples."""
    _check_corpus(hypotheses, references)
    return sum(rouge_l_pair(hypothesis, reference) for hypothesis, reference in zip(hypotheses, references)) / len(
        hypotheses
    )
