import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from test.utils.tiny_models import tiny_transformer_config

from fla_slt.common.config import Config
from fla_slt.common.exceptions import ConfigValidationError, ShapeError, VocabularyError
from fla_slt.models.features import FeatureSequence, Tap
from fla_slt.models.transformer import (
    LIGHT_T_PRESETS,
    EncoderDecoderTransformer,
    TransformerConfig,
    build_light_t,
    causal_mask,
    parameter_count,
    positional_encoding,
    sinusoidal_table,
)

VOCAB_SIZE = 11


@pytest.fixture()
def model() -> EncoderDecoderTransformer:
    torch.manual_seed(0)
    return EncoderDecoderTransformer(tiny_transformer_config(VOCAB_SIZE)).eval()


def textual(values: torch.Tensor, lengths: list) -> FeatureSequence:
    return FeatureSequence.masked(values, torch.tensor(lengths), Tap.textual)


def test_positional_encoding_at_zero() -> None:
    encoding = positional_encoding(0, 8)
    assert torch.all(encoding[0::2] == 0)
    assert torch.all(encoding[1::2] == 1)


def test_positional_encoding_closed_form() -> None:
    encoding = positional_encoding(1, 4).double()
    expected = torch.tensor([math.sin(1), math.cos(1), math.sin(1 / 100), math.cos(1 / 100)], dtype=torch.float64)
    assert torch.allclose(encoding, expected, atol=1e-6)


@pytest.mark.parametrize("position", [1, 10, 100])
def test_positional_encoding_is_bounded_and_tabulated(position: int) -> None:
    encoding = positional_encoding(position, 16)
    assert torch.all(encoding.abs() <= 1)
    assert torch.allclose(sinusoidal_table(128, 16)[position], encoding)


def test_positional_encoding_out_of_range() -> None:
    with pytest.raises(ShapeError):
        positional_encoding(512, 8, max_positions=512)


def test_causal_mask() -> None:
    assert causal_mask(3, torch.device("cpu")).tolist() == [
        [False, True, True],
        [False, False, True],
        [False, False, False],
    ]


@pytest.mark.parametrize("length", [1, 4, 16])
def test_encoder_keeps_length(model: EncoderDecoderTransformer, length: int) -> None:
    hidden = model.encode(textual(torch.randn(1, length, 8), [length]))
    assert hidden.values.shape == (1, length, 8)
    assert hidden.tap is Tap.hidden


def test_encoder_ignores_padding_rows(model: EncoderDecoderTransformer) -> None:
    values = torch.randn(2, 5, 8)
    reference = model.text_encoder(values, torch.tensor([[True] * 5, [True, True, True, False, False]]))
    values[1, 3:] = torch.randn(2, 8) * 10
    perturbed = model.text_encoder(values, torch.tensor([[True] * 5, [True, True, True, False, False]]))
    assert torch.allclose(reference[1, :3], perturbed[1, :3], atol=1e-6)
    assert torch.all(perturbed[1, 3:] == 0)


def test_encoder_rejects_fully_masked_input(model: EncoderDecoderTransformer) -> None:
    with pytest.raises(ShapeError):
        model.text_encoder(torch.randn(1, 3, 8), torch.zeros(1, 3, dtype=torch.bool))


def test_embed_targets_with_zero_table_is_positional(model: EncoderDecoderTransformer) -> None:
    torch.nn.init.zeros_(model.word_embedding.weight)
    embedded = model.embed_targets(torch.tensor([[1, 5, 1]]))
    assert torch.allclose(embedded[0], sinusoidal_table(64, 8)[:3])


def test_equal_tokens_differ_by_positions(model: EncoderDecoderTransformer) -> None:
    embedded = model.embed_targets(torch.tensor([[4, 7, 4]]))[0]
    table = sinusoidal_table(64, 8)
    assert torch.allclose(embedded[0] - embedded[2], table[0] - table[2], atol=1e-6)


def test_embed_targets_rejects_unknown_ids(model: EncoderDecoderTransformer) -> None:
    with pytest.raises(VocabularyError):
        model.embed_targets(torch.tensor([[1, VOCAB_SIZE]]))


def test_decoder_is_causal(model: EncoderDecoderTransformer) -> None:
    memory = model.encode(textual(torch.randn(1, 4, 8), [4]))
    ids = torch.tensor([[1, 4, 5, 6, 7]])
    reference = model.lm_head_logprobs(model.text_decoder(ids, memory))
    for position in range(1, ids.shape[1]):
        changed = ids.clone()
        changed[0, position:] = 9
        logprobs = model.lm_head_logprobs(model.text_decoder(changed, memory))
        assert torch.allclose(logprobs[0, :position], reference[0, :position], atol=1e-6)


def test_decoder_ignores_memory_padding(model: EncoderDecoderTransformer) -> None:
    values = torch.randn(1, 6, 8)
    memory = model.encode(textual(values, [4]))
    ids = torch.tensor([[1, 4, 5]])
    reference = model.text_decoder(ids, memory)
    values[0, 4:] = torch.randn(2, 8)
    perturbed = model.text_decoder(ids, model.encode(textual(values, [4])))
    assert torch.allclose(reference, perturbed, atol=1e-6)


def test_first_step_is_defined_and_deterministic(model: EncoderDecoderTransformer) -> None:
    memory = FeatureSequence(torch.zeros(1, 2, 8), torch.tensor([2]), Tap.hidden)
    first = model.next_token_logprobs(memory, [1])
    assert torch.isfinite(first).all()
    assert torch.equal(first, model.next_token_logprobs(memory, [1]))


def test_lm_head_of_zeros_is_uniform(model: EncoderDecoderTransformer) -> None:
    torch.nn.init.zeros_(model.lm_head.weight)
    torch.nn.init.zeros_(model.lm_head.bias)
    probabilities = model.lm_head_logprobs(torch.zeros(2, 8)).exp()
    assert torch.allclose(probabilities, torch.full((2, VOCAB_SIZE), 1 / VOCAB_SIZE))


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_lm_head_normalizes(seed: int) -> None:
    torch.manual_seed(seed)
    head = EncoderDecoderTransformer(tiny_transformer_config(VOCAB_SIZE))
    outputs = torch.randn(3, 8)
    logprobs = head.lm_head_logprobs(outputs)
    assert torch.allclose(logprobs.exp().sum(-1), torch.ones(3), atol=1e-6)
    shifted = torch.log_softmax(head.lm_head(outputs) + 3.0, dim=-1)
    assert torch.allclose(shifted, logprobs, atol=1e-6)


def test_encoder_gradient_check() -> None:
    torch.manual_seed(5)
    model = EncoderDecoderTransformer(tiny_transformer_config(VOCAB_SIZE)).double().train()
    values = torch.randn(1, 3, 8, dtype=torch.float64, requires_grad=True)
    mask = torch.ones(1, 3, dtype=torch.bool)
    assert torch.autograd.gradcheck(lambda inputs: model.text_encoder(inputs, mask), (values,), eps=1e-6, atol=1e-5)


def test_decoder_and_head_gradient_check() -> None:
    torch.manual_seed(6)
    model = EncoderDecoderTransformer(tiny_transformer_config(VOCAB_SIZE)).double().train()
    memory_values = torch.randn(1, 3, 8, dtype=torch.float64, requires_grad=True)
    ids = torch.tensor([[1, 4, 5]])

    def function(values: torch.Tensor) -> torch.Tensor:
        memory = FeatureSequence(values, torch.tensor([3]), Tap.hidden)
        return model.lm_head_logprobs(model.text_decoder(ids, memory))

    assert torch.autograd.gradcheck(function, (memory_values,), eps=1e-6, atol=1e-5)


def test_embedding_gradient_check() -> None:
    torch.manual_seed(7)
    table = torch.randn(VOCAB_SIZE, 8, dtype=torch.float64, requires_grad=True)
    ids = torch.tensor([[1, 4, 4, 2]])
    positions = sinusoidal_table(8, 8).double()[:4]
    assert torch.autograd.gradcheck(
        lambda weights: torch.nn.functional.embedding(ids, weights) + positions, (table,), eps=1e-6, atol=1e-5
    )


@pytest.mark.parametrize(
    "preset, dims", [("tiny", (1, 4, 256, 1024)), ("base", (3, 8, 512, 2048)), ("large", (4, 8, 1024, 4096))]
)
def test_light_t_presets(preset: str, dims: tuple) -> None:
    config = build_light_t(preset, vocab_size=34)
    assert (config.layers, config.heads, config.hidden, config.ffn) == dims


@pytest.mark.slow
def test_light_t_scale_is_monotone() -> None:
    counts = [parameter_count(EncoderDecoderTransformer(build_light_t(preset, 34))) for preset in LIGHT_T_PRESETS]
    assert counts == sorted(counts)
    assert len(set(counts)) == len(counts)


def test_unknown_preset() -> None:
    with pytest.raises(ConfigValidationError):
        build_light_t("huge", 34)


def test_config_from_preset_or_explicit_dims() -> None:
    preset = Config({"preset": "small", "max_positions": 64, "dropout": 0.0})
    assert TransformerConfig.from_config(preset, 20) == build_light_t("small", 20, 64, 0.0)
    explicit = Config(
        {"preset": None, "layers": 2, "heads": 2, "hidden": 8, "ffn": 16, "max_positions": 64, "dropout": 0.0}
    )
    assert TransformerConfig.from_config(explicit, 20).hidden == 8


@pytest.mark.parametrize("kwargs", [{"hidden": 10, "heads": 4}, {"layers": 0}, {"dropout": 1.0}])
def test_invalid_transformer_config(kwargs: dict) -> None:
    base = {"layers": 1, "heads": 2, "hidden": 8, "ffn": 16, "vocab_size": 10}
    with pytest.raises(ConfigValidationError):
        TransformerConfig(**{**base, **kwargs})
