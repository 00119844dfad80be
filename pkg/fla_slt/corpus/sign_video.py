from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List

import numpy as np

from fla_slt.common.constants import Splits
from fla_slt.common.exceptions import CorpusError


@dataclass(frozen=True)
class SignVideo:
    """A frame sequence of shape (T, 3, H, W) with values in [0, 1] and its spoken transcript."""

    frames: np.ndarray
    transcript: str
    sample_id: str

    def __post_init__(self) -> None:
        if self.frames.ndim != 4 or self.frames.shape[1] != 3:
            raise CorpusError(f"{self.sample_id}: frames must have shape (T, 3, H, W), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise CorpusError(f"{self.sample_id}: a sign video needs at least one frame")
        if not self.transcript.strip():
            raise CorpusError(f"{self.sample_id}: transcript is empty")

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    @property
    def image_size(self) -> tuple:
        return int(self.frames.shape[2]), int(self.frames.shape[3])


@dataclass
class Corpus:
    splits: Dict[str, List[SignVideo]] = field(default_factory=lambda: {name: [] for name in Splits.names()})

    def __getitem__(self, split: str) -> List[SignVideo]:
        if split not in self.splits:
            raise CorpusError(f"unknown split {split!r}, expected one of {sorted(self.splits)}")
        return self.splits[split]

    def __iter__(self) -> Iterator[SignVideo]:
        for name in Splits.names():
            yield from self.splits.get(name, [])

    def __len__(self) -> int:
        return sum(len(samples) for samples in self.splits.values())

    @property
    def train(self) -> List[SignVideo]:
        return self["train"]

    @property
    def dev(self) -> List[SignVideo]:
        return self["dev"]

    @property
    def test(self) -> List[SignVideo]:
        return self["test"]

    def transcripts(self, split: str) -> List[str]:
        return [sample.transcript for sample in self[split]]
