from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import torch

from fla_slt.common.exceptions import FeatureTapError, ShapeError


class Tap(Enum):
    frame_wise = "frame_wise"
    sign_wise = "sign_wise"
    textual = "textual"
    hidden = "hidden"


@dataclass
class FeatureSequence:
    """Batched, length-tagged features: values (B, N, dim), rows at or beyond ``lengths`` are zero."""

    values: torch.Tensor
    lengths: torch.Tensor
    tap: Tap

    def __post_init__(self) -> None:
        if self.values.dim() != 3:
            raise ShapeError(f"feature values must be (B, N, dim), got {tuple(self.values.shape)}")
        if self.lengths.shape != (self.values.shape[0],):
            raise ShapeError(f"lengths {tuple(self.lengths.shape)} do not match batch size {self.values.shape[0]}")
        if len(self.lengths) and int(self.lengths.max()) > self.values.shape[1]:
            raise ShapeError(f"length {int(self.lengths.max())} exceeds row count {self.values.shape[1]}")

    @classmethod
    def masked(cls, values: torch.Tensor, lengths: torch.Tensor, tap: Tap) -> FeatureSequence:
        """Build a sequence and zero every row beyond its length."""
        mask = length_mask(lengths, values.shape[1])
        return cls(values=values * mask.unsqueeze(-1).to(values.dtype), lengths=lengths, tap=tap)

    @property
    def mask(self) -> torch.Tensor:
        return length_mask(self.lengths, self.values.shape[1])

    @property
    def dim(self) -> int:
        return int(self.values.shape[-1])

    def expect(self, tap: Tap, dim: int) -> None:
        if self.tap is not tap:
            raise FeatureTapError(f"expected {tap.value} features, got {self.tap.value}")
        if self.dim != dim:
            raise ShapeError(f"expected {tap.value} features of width {dim}, got {self.dim}")


def length_mask(lengths: torch.Tensor, width: int) -> torch.Tensor:
    return torch.arange(width, device=lengths.device)[None, :] < lengths[:, None]
