from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import torch
from torch import nn
from torch.nn import functional as F

from fla_slt.common.config import Config
from fla_slt.common.exceptions import ConfigValidationError, ShapeError
from fla_slt.models.features import FeatureSequence, Tap, length_mask


@dataclass(frozen=True)
class VisualEncoderConfig:
    backbone_channels: Tuple[int, ...] = (16, 32, 64, 128)
    feature_dim: int = 128
    temporal_kernel: int = 5
    downsample_rate: float = 0.25

    def __post_init__(self) -> None:
        if not self.backbone_channels or min(self.backbone_channels) < 1:
            raise ConfigValidationError(f"backbone_channels must be positive, got {self.backbone_channels}")
        if self.feature_dim < 1:
            raise ConfigValidationError(f"feature_dim must be positive, got {self.feature_dim}")
        if self.temporal_kernel < 1 or self.temporal_kernel % 2 == 0:
            raise ConfigValidationError(f"temporal_kernel must be an odd positive integer, got {self.temporal_kernel}")
        check_rate(self.downsample_rate)

    @classmethod
    def from_config(cls, config: Config) -> VisualEncoderConfig:
        return cls(
            backbone_channels=tuple(config.backbone_channels),
            feature_dim=config.feature_dim,
            temporal_kernel=config.temporal_kernel,
            downsample_rate=float(config.downsample_rate),
        )

    @property
    def frame_feature_dim(self) -> int:
        return self.backbone_channels[-1]


def check_rate(rate: float) -> None:
    if not 0.0 < rate <= 1.0:
        raise ConfigValidationError(f"downsample rate must lie in (0, 1], got {rate}")


def downsampled_length(frame_count: int, rate: float) -> int:
    check_rate(rate)
    return math.ceil(rate * frame_count - 1e-9)


def downsample_indices(frame_count: int, rate: float) -> List[int]:
    """Uniform-stride frame selection: ceil(rate*T) indices round(i/rate), starting at 0.

    Indices are clamped so that they stay strictly increasing and below T; rate 1 keeps every frame.
    """
    if frame_count < 1:
        raise ShapeError("cannot downsample a video without frames")
    kept = downsampled_length(frame_count, rate)
    indices = []
    for i in range(kept):
        index = int(math.floor(i / rate + 0.5))
        indices.append(min(index, frame_count - kept + i))
    return indices


def downsample_video(frames: torch.Tensor, rate: float) -> torch.Tensor:
    return frames[downsample_indices(int(frames.shape[0]), rate)]


def downsample_batch(videos: torch.Tensor, lengths: torch.Tensor, rate: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-sample downsampling of a padded (B, T, ...) batch."""
    if rate == 1.0:
        return videos, lengths
    per_sample = [downsample_indices(int(length), rate) for length in lengths]
    new_lengths = torch.tensor([len(indices) for indices in per_sample], dtype=torch.long)
    result = videos.new_zeros((videos.shape[0], int(new_lengths.max()), *videos.shape[2:]))
    for sample, indices in enumerate(per_sample):
        result[sample, : len(indices)] = videos[sample, indices]
    return result, new_lengths


class ConvBlock(nn.Sequential):
    def __init__(self, in_channels: int, out_channels: int) -> None:
        super().__init__(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(),
            nn.MaxPool2d(2, ceil_mode=True),
        )


class Backbone(nn.Module):
    """Small frame-wise CNN standing in for ResNet18; any module mapping (F, 3, H, W) -> (F, out_dim) fits."""

    def __init__(self, channels: Sequence[int], in_channels: int = 3) -> None:
        super().__init__()
        widths = [in_channels, *channels]
        self.blocks = nn.Sequential(*[ConvBlock(widths[i], widths[i + 1]) for i in range(len(channels))])
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.out_dim = channels[-1]

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        return self.pool(self.blocks(frames)).flatten(1)


class TemporalModule(nn.Module):
    """Conv1d over time (stride 1, same-length padding) + BatchNorm + ReLU.

    Batch statistics come from valid positions only, so padding never shifts a sample's features. A training
    batch with a single valid position is normalized with the running statistics.
    """

    def __init__(self, in_dim: int, out_dim: int, kernel_size: int) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.conv = nn.Conv1d(in_dim, out_dim, kernel_size=kernel_size, padding=kernel_size // 2)
        self.norm = nn.BatchNorm1d(out_dim)
        self.activation = nn.ReLU()

    def normalize(self, rows: torch.Tensor) -> torch.Tensor:
        if self.training and rows.shape[0] < 2:
            norm = self.norm
            return F.batch_norm(
                rows, norm.running_mean, norm.running_var, norm.weight, norm.bias, training=False, eps=norm.eps
            )
        return self.norm(rows)

    def forward(self, frame_features: FeatureSequence) -> FeatureSequence:
        frame_features.expect(Tap.frame_wise, self.in_dim)
        if frame_features.values.shape[1] < 1 or int(frame_features.lengths.min()) < 1:
            raise ShapeError("the temporal module needs sequences of length >= 1")
        convolved = self.conv(frame_features.values.transpose(1, 2)).transpose(1, 2)
        mask = frame_features.mask
        values = convolved.new_zeros(convolved.shape)
        values[mask] = self.activation(self.normalize(convolved[mask]))
        return FeatureSequence(values=values, lengths=frame_features.lengths, tap=Tap.sign_wise)


class VisualEncoder(nn.Module):
    def __init__(self, config: VisualEncoderConfig, backbone: Optional[nn.Module] = None) -> None:
        super().__init__()
        self.config = config
        self.backbone = Backbone(config.backbone_channels) if backbone is None else backbone
        self.temporal = TemporalModule(int(self.backbone.out_dim), config.feature_dim, config.temporal_kernel)

    @property
    def frame_feature_dim(self) -> int:
        return int(self.backbone.out_dim)

    @property
    def feature_dim(self) -> int:
        return self.config.feature_dim

    def encode_frames(self, videos: torch.Tensor, lengths: torch.Tensor) -> FeatureSequence:
        """Backbone applied to valid frames only, one frame at a time (no cross-frame mixing)."""
        batch_size, frame_count = videos.shape[:2]
        mask = length_mask(lengths, frame_count)
        valid_frames = videos[mask]
        features = videos.new_zeros((batch_size, frame_count, self.frame_feature_dim))
        features[mask] = self.backbone(valid_frames)
        return FeatureSequence(values=features, lengths=lengths, tap=Tap.frame_wise)

    def encode_video(self, frames: Union[torch.Tensor, Sequence[torch.Tensor]]) -> FeatureSequence:
        if not isinstance(frames, torch.Tensor):
            if not frames:
                raise ShapeError("a video needs at least one frame")
            shapes = {tuple(frame.shape) for frame in frames}
            if len(shapes) != 1:
                raise ShapeError(f"all frames must share one size, got {sorted(shapes)}")
            frames = torch.stack(list(frames))
        if frames.dim() != 4 or frames.shape[0] < 1:
            raise ShapeError(f"frames must be (T, 3, H, W) with T >= 1, got {tuple(frames.shape)}")
        return self.encode_frames(frames.unsqueeze(0), torch.tensor([frames.shape[0]]))

    def taps(self, videos: torch.Tensor, lengths: torch.Tensor) -> Dict[Tap, FeatureSequence]:
        videos, lengths = downsample_batch(videos, lengths, self.config.downsample_rate)
        frame_wise = self.encode_frames(videos, lengths)
        return {Tap.frame_wise: frame_wise, Tap.sign_wise: self.temporal(frame_wise)}

    def forward(self, videos: torch.Tensor, lengths: torch.Tensor) -> FeatureSequence:
        return self.taps(videos, lengths)[Tap.sign_wise]

    def last_layer_prefix(self) -> str:
        return "temporal.conv"


def visual_forward(video: torch.Tensor, encoder: VisualEncoder) -> FeatureSequence:
    """f_{1:N} for one (T, 3, H, W) video: downsample -> backbone -> temporal module."""
    return encoder(video.unsqueeze(0), torch.tensor([video.shape[0]]))
