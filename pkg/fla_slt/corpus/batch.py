from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import List, Sequence, Tuple

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from fla_slt.common.exceptions import ShapeError
from fla_slt.corpus.sign_video import SignVideo
from fla_slt.corpus.vocabulary import Vocabulary, tokenize


@dataclass
class Batch:
    videos: torch.Tensor  # (B, T, 3, H, W), zero beyond frame_lengths
    frame_lengths: torch.Tensor  # (B,)
    frame_mask: torch.Tensor  # (B, T) bool, True on valid frames
    targets: torch.Tensor  # (B, L), pad id beyond target_lengths
    target_lengths: torch.Tensor  # (B,)
    target_mask: torch.Tensor  # (B, L) bool
    sample_ids: Tuple[str, ...]
    transcripts: Tuple[str, ...]

    def __len__(self) -> int:
        return int(self.videos.shape[0])

    @property
    def decoder_inputs(self) -> torch.Tensor:
        return self.targets[:, :-1]

    @property
    def decoder_targets(self) -> torch.Tensor:
        return self.targets[:, 1:]

    @property
    def decoder_target_mask(self) -> torch.Tensor:
        return self.target_mask[:, 1:]


def _mask_from_lengths(lengths: torch.Tensor, width: int) -> torch.Tensor:
    return torch.arange(width)[None, :] < lengths[:, None]


def collate(samples: Sequence[SignVideo], vocab: Vocabulary) -> Batch:
    if not samples:
        raise ShapeError("cannot collate an empty list of samples")
    sizes = {sample.image_size for sample in samples}
    if len(sizes) != 1:
        raise ShapeError(f"samples in one batch must share the image size, got {sorted(sizes)}")
    height, width = sizes.pop()
    token_sequences = [tokenize(sample.transcript, vocab).ids for sample in samples]
    frame_lengths = torch.tensor([sample.frame_count for sample in samples], dtype=torch.long)
    target_lengths = torch.tensor([len(ids) for ids in token_sequences], dtype=torch.long)
    max_frames, max_tokens = int(frame_lengths.max()), int(target_lengths.max())

    videos = torch.zeros((len(samples), max_frames, 3, height, width), dtype=torch.float32)
    targets = torch.full((len(samples), max_tokens), vocab.pad_id, dtype=torch.long)
    for index, (sample, ids) in enumerate(zip(samples, token_sequences)):
        videos[index, : sample.frame_count] = torch.from_numpy(np.ascontiguousarray(sample.frames, dtype=np.float32))
        targets[index, : len(ids)] = torch.tensor(ids, dtype=torch.long)
    return Batch(
        videos=videos,
        frame_lengths=frame_lengths,
        frame_mask=_mask_from_lengths(frame_lengths, max_frames),
        targets=targets,
        target_lengths=target_lengths,
        target_mask=_mask_from_lengths(target_lengths, max_tokens),
        sample_ids=tuple(sample.sample_id for sample in samples),
        transcripts=tuple(sample.transcript for sample in samples),
    )


def uncollate(batch: Batch) -> List[Tuple[np.ndarray, List[int]]]:
    """Strip padding again: per sample (frames, token ids)."""
    result: List[Tuple[np.ndarray, List[int]]] = []
    for index in range(len(batch)):
        frame_count = int(batch.frame_lengths[index])
        token_count = int(batch.target_lengths[index])
        result.append((batch.videos[index, :frame_count].numpy(), batch.targets[index, :token_count].tolist()))
    return result


class SignVideoDataset(Dataset):
    def __init__(self, samples: Sequence[SignVideo]) -> None:
        self._samples = list(samples)

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, index: int) -> SignVideo:
        return self._samples[index]


def epoch_order(sample_count: int, seed: int, epoch: int, shuffle: bool = True) -> List[int]:
    """Sample order of one epoch; depends only on (seed, epoch) so a resumed run replays it."""
    if not shuffle:
        return list(range(sample_count))
    generator = torch.Generator().manual_seed(seed * 100_003 + epoch)
    return torch.randperm(sample_count, generator=generator).tolist()


def make_loader(
    samples: Sequence[SignVideo],
    vocab: Vocabulary,
    batch_size: int,
    order: Sequence[int],
    workers: int = 0,
) -> DataLoader:
    return DataLoader(
        SignVideoDataset(samples),
        batch_size=batch_size,
        sampler=list(order),
        collate_fn=partial(collate, vocab=vocab),
        num_workers=workers,
    )
