from __future__ import annotations

import math

import torch

from fla_slt.common.constants import LABEL_SMOOTHING
from fla_slt.common.exceptions import ConfigValidationError, ShapeError

# log(0) stand-in so that a zero-probability class contributes a finite term
LOGPROB_FLOOR = -1e4


def check_epsilon(epsilon: float) -> None:
    if not 0.0 <= epsilon < 1.0:
        raise ConfigValidationError(f"label smoothing must lie in [0, 1), got {epsilon}")


def smoothed_targets(targets: torch.Tensor, vocab_size: int, epsilon: float) -> torch.Tensor:
    """q_k = (1 - eps) * 1[k = target] + eps / V."""
    check_epsilon(epsilon)
    one_hot = torch.nn.functional.one_hot(targets, vocab_size).to(torch.get_default_dtype())
    return (1.0 - epsilon) * one_hot + epsilon / vocab_size


def smoothed_target_entropy(vocab_size: int, epsilon: float) -> float:
    """H(q), the lower bound of the label-smoothed loss."""
    check_epsilon(epsilon)
    peak = 1.0 - epsilon + epsilon / vocab_size
    entropy = -peak * math.log(peak)
    if epsilon > 0.0:
        rest = epsilon / vocab_size
        entropy -= (vocab_size - 1) * rest * math.log(rest)
    return entropy


def label_smoothed_ce(
    logprobs: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor, epsilon: float = LABEL_SMOOTHING
) -> torch.Tensor:
    """Mean over unmasked positions of -sum_k q_k log p_k.

    ``logprobs`` is (..., V), ``targets`` and ``mask`` share its leading shape.
    """
    check_epsilon(epsilon)
    if logprobs.shape[:-1] != targets.shape or targets.shape != mask.shape:
        raise ShapeError(
            f"logprobs {tuple(logprobs.shape)}, targets {tuple(targets.shape)} and mask {tuple(mask.shape)} disagree"
        )
    if not bool(mask.any()):
        raise ShapeError("every target position is masked, the loss is undefined")
    logprobs = logprobs.clamp(min=LOGPROB_FLOOR)
    target_term = -logprobs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    uniform_term = -logprobs.mean(dim=-1)
    per_position = (1.0 - epsilon) * target_term + epsilon * uniform_term
    return per_position[mask].mean()
