import math
from decimal import Decimal, getcontext

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from fla_slt.common.exceptions import ConfigValidationError, ShapeError
from fla_slt.models.losses import label_smoothed_ce, smoothed_target_entropy, smoothed_targets


def precise_loss(probabilities: list, target: int, epsilon: float) -> float:
    getcontext().prec = 50
    vocab_size = len(probabilities)
    total = Decimal(0)
    for index, probability in enumerate(probabilities):
        weight = Decimal(epsilon) / vocab_size + (Decimal(1) - Decimal(epsilon) if index == target else Decimal(0))
        total -= weight * Decimal(probability).ln()
    return float(total)


def test_matches_high_precision_reference() -> None:
    probabilities = [0.7, 0.1, 0.1, 0.1]
    logprobs = torch.tensor([[probabilities]], dtype=torch.float64).log()
    loss = label_smoothed_ce(logprobs, torch.tensor([[0]]), torch.tensor([[True]]), epsilon=0.2)
    expected = -(0.85 * math.log(0.7) + 3 * 0.05 * math.log(0.1))
    assert float(loss) == pytest.approx(expected, abs=1e-9)
    assert float(loss) == pytest.approx(precise_loss(probabilities, 0, 0.2), abs=1e-9)


@pytest.mark.parametrize("epsilon", [0.0, 0.2, 0.5])
@pytest.mark.parametrize("target", [0, 3])
def test_uniform_prediction_costs_log_v(epsilon: float, target: int) -> None:
    logprobs = torch.full((1, 1, 4), math.log(0.25), dtype=torch.float64)
    loss = label_smoothed_ce(logprobs, torch.tensor([[target]]), torch.tensor([[True]]), epsilon)
    assert float(loss) == pytest.approx(math.log(4), abs=1e-9)


def test_confident_correct_prediction_without_smoothing_costs_nothing() -> None:
    logprobs = torch.tensor([[[0.0, -math.inf, -math.inf]]], dtype=torch.float64)
    loss = label_smoothed_ce(logprobs, torch.tensor([[0]]), torch.tensor([[True]]), epsilon=0.0)
    assert float(loss) == pytest.approx(0.0, abs=1e-9)


def test_zero_smoothing_is_negative_log_likelihood() -> None:
    torch.manual_seed(0)
    logprobs = torch.log_softmax(torch.randn(2, 3, 5, dtype=torch.float64), dim=-1)
    targets = torch.tensor([[1, 2, 0], [4, 4, 0]])
    mask = torch.tensor([[True, True, True], [True, True, False]])
    loss = label_smoothed_ce(logprobs, targets, mask, epsilon=0.0)
    expected = torch.nn.functional.nll_loss(logprobs[mask], targets[mask])
    assert float(loss) == pytest.approx(float(expected), abs=1e-12)


def test_masked_positions_do_not_count() -> None:
    torch.manual_seed(1)
    logprobs = torch.log_softmax(torch.randn(1, 3, 5, dtype=torch.float64), dim=-1)
    targets = torch.tensor([[1, 2, 0]])
    mask = torch.tensor([[True, True, False]])
    changed = logprobs.clone()
    changed[0, 2] = torch.log_softmax(torch.randn(5, dtype=torch.float64), dim=-1)
    assert float(label_smoothed_ce(logprobs, targets, mask)) == float(label_smoothed_ce(changed, targets, mask))


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=2, max_value=12),
    st.floats(min_value=0.0, max_value=0.9).filter(lambda epsilon: epsilon == 0.0 or epsilon > 1e-6),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_loss_is_bounded_by_target_entropy(vocab_size: int, epsilon: float, seed: int) -> None:
    generator = torch.Generator().manual_seed(seed)
    logprobs = torch.log_softmax(torch.randn(3, 4, vocab_size, generator=generator, dtype=torch.float64), dim=-1)
    targets = torch.randint(vocab_size, (3, 4), generator=generator)
    loss = label_smoothed_ce(logprobs, targets, torch.ones(3, 4, dtype=torch.bool), epsilon)
    assert float(loss) >= smoothed_target_entropy(vocab_size, epsilon) - 1e-9


def test_target_distribution_reaches_the_bound() -> None:
    targets = torch.tensor([[2]])
    q = smoothed_targets(targets, 5, 0.2).double()
    assert float(q.sum()) == pytest.approx(1.0)
    loss = label_smoothed_ce(q.log(), targets, torch.tensor([[True]]), 0.2)
    assert float(loss) == pytest.approx(smoothed_target_entropy(5, 0.2), abs=1e-6)


@pytest.mark.parametrize("epsilon", [-0.1, 1.0])
def test_invalid_epsilon(epsilon: float) -> None:
    with pytest.raises(ConfigValidationError):
        label_smoothed_ce(torch.zeros(1, 1, 3), torch.tensor([[0]]), torch.tensor([[True]]), epsilon)


def test_shape_errors() -> None:
    with pytest.raises(ShapeError):
        label_smoothed_ce(torch.zeros(1, 2, 3), torch.tensor([[0]]), torch.tensor([[True]]))
    with pytest.raises(ShapeError):
        label_smoothed_ce(torch.zeros(1, 1, 3), torch.tensor([[0]]), torch.tensor([[False]]))
