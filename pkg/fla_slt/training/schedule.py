from __future__ import annotations

import math
from typing import List, Tuple

from torch.optim import Optimizer

from fla_slt.common.exceptions import ConfigValidationError


def cosine_lr(step: int, t_max: int, lr_max: float, lr_min: float) -> float:
    """Single-cycle cosine annealing from lr_max at step 0 to lr_min at t_max; later steps stay at lr_min."""
    if t_max < 1:
        raise ConfigValidationError(f"cosine schedule length must be >= 1, got {t_max}")
    if step < 0:
        raise ConfigValidationError(f"schedule step must be >= 0, got {step}")
    if step >= t_max:
        return lr_min
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / t_max))


def apply_cosine_lr(optimizer: Optimizer, step: int, t_max: int, lr_min_ratio: float) -> None:
    """Set every param group's ``lr`` from its ``peak_lr``."""
    for group in optimizer.param_groups:
        group["lr"] = cosine_lr(step, t_max, group["peak_lr"], group["peak_lr"] * lr_min_ratio)


def current_rates(optimizer: Optimizer) -> List[Tuple[str, float]]:
    return [(group["name"], group["lr"]) for group in optimizer.param_groups]
