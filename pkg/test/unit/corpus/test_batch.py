from typing import Tuple

import pytest
import torch

from fla_slt.common.exceptions import ShapeError
from fla_slt.corpus.batch import collate, epoch_order, make_loader, uncollate
from fla_slt.corpus.sign_video import Corpus, SignVideo
from fla_slt.corpus.vocabulary import Vocabulary, tokenize


def test_collate_pads_and_masks(tiny_corpus: Corpus, tiny_vocabularies: Tuple[Vocabulary, Vocabulary]) -> None:
    _, vocab = tiny_vocabularies
    samples = tiny_corpus.train[:4]
    batch = collate(samples, vocab)
    max_frames = max(sample.frame_count for sample in samples)
    assert batch.videos.shape == (4, max_frames, 3, 16, 16)
    for index, sample in enumerate(samples):
        assert int(batch.frame_mask[index].sum()) == sample.frame_count
        assert torch.all(batch.videos[index, sample.frame_count :] == 0)
        ids = tokenize(sample.transcript, vocab).ids
        assert batch.targets[index, : len(ids)].tolist() == list(ids)
        assert torch.all(batch.targets[index, len(ids) :] == vocab.pad_id)
    assert batch.decoder_inputs.shape == batch.decoder_targets.shape


def test_uncollate_strips_padding(tiny_corpus: Corpus, tiny_vocabularies: Tuple[Vocabulary, Vocabulary]) -> None:
    _, vocab = tiny_vocabularies
    samples = tiny_corpus.train[:5]
    for sample, (frames, ids) in zip(samples, uncollate(collate(samples, vocab))):
        assert frames.shape == sample.frames.shape
        assert ids == list(tokenize(sample.transcript, vocab).ids)


def test_collate_rejects_mixed_image_sizes(
    tiny_corpus: Corpus, tiny_vocabularies: Tuple[Vocabulary, Vocabulary]
) -> None:
    _, vocab = tiny_vocabularies
    sample = tiny_corpus.train[0]
    small = SignVideo(frames=sample.frames[:, :, :8, :8], transcript=sample.transcript, sample_id="small")
    with pytest.raises(ShapeError):
        collate([sample, small], vocab)
    with pytest.raises(ShapeError):
        collate([], vocab)


def test_epoch_order_depends_on_seed_and_epoch_only() -> None:
    assert epoch_order(10, seed=1, epoch=2) == epoch_order(10, seed=1, epoch=2)
    assert sorted(epoch_order(10, seed=1, epoch=2)) == list(range(10))
    assert epoch_order(10, seed=1, epoch=2) != epoch_order(10, seed=1, epoch=3)
    assert epoch_order(4, seed=1, epoch=0, shuffle=False) == [0, 1, 2, 3]


def test_loader_follows_the_order(tiny_corpus: Corpus, tiny_vocabularies: Tuple[Vocabulary, Vocabulary]) -> None:
    _, vocab = tiny_vocabularies
    order = epoch_order(len(tiny_corpus.train), seed=0, epoch=0)
    loader = make_loader(tiny_corpus.train, vocab, batch_size=5, order=order)
    seen = [sample_id for batch in loader for sample_id in batch.sample_ids]
    assert seen == [tiny_corpus.train[index].sample_id for index in order]
