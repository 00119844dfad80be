"""Per-layer gradient-norm and parameter-norm recording hooked into the trainer's backward signal."""
from __future__ import annotations

import math
from typing import Any, Dict, List, Optional, Sequence

import torch
from signalslot import Signal
from torch import nn

from fla_slt.common.exceptions import DiagnosticsError
from fla_slt.common.logger import LoggerFactory
from fla_slt.diagnostics.norm_trace import NormRecord, NormTrace

LOG = LoggerFactory.get_logger(__name__)

ENCODER_LAST = "encoder_last"
BACKEND_LAST = "backend_last"


def resolve_selector(model: nn.Module, selector: str) -> List[nn.Parameter]:
    """Parameters named by a prefix of their qualified name, or by the ``encoder_last``/``backend_last`` aliases.

    ``encoder_last`` is the temporal-module convolution, ``backend_last`` the final decoder block.
    """
    prefix = selector
    if selector in (ENCODER_LAST, BACKEND_LAST):
        owner = "visual_encoder" if selector == ENCODER_LAST else "backend"
        if not hasattr(model, owner):
            raise DiagnosticsError(f"selector '{selector}' needs a model with a {owner}")
        prefix = f"{owner}.{getattr(model, owner).last_layer_prefix()}"
    parameters = [
        parameter
        for name, parameter in model.named_parameters()
        if name == prefix or name.startswith(prefix + ".")
    ]
    if not parameters:
        raise DiagnosticsError(f"selector '{selector}' matches no parameter of the model")
    return parameters


def _l2(tensors: Sequence[torch.Tensor]) -> float:
    return math.sqrt(sum(float(tensor.detach().double().pow(2).sum()) for tensor in tensors))


class NormWatch:
    def __init__(self, model: nn.Module, selectors: Sequence[str]) -> None:
        self.trace = NormTrace(watched_layers=list(selectors))
        self._groups: Dict[str, List[nn.Parameter]] = {
            selector: resolve_selector(model, selector) for selector in selectors
        }
        self._initial: Dict[str, List[torch.Tensor]] = {
            selector: [parameter.detach().clone() for parameter in parameters]
            for selector, parameters in self._groups.items()
        }
        self._signal: Optional[Signal] = None

    @property
    def attached(self) -> bool:
        return self._signal is not None

    def record_step(self, step: int) -> List[NormRecord]:
        records = []
        with torch.no_grad():
            for layer_id, parameters in self._groups.items():
                if any(parameter.grad is None for parameter in parameters):
                    raise DiagnosticsError(f"no gradients for '{layer_id}' at step {step}, record after backward")
                drift = _l2([parameter - initial for parameter, initial in zip(parameters, self._initial[layer_id])])
                record = NormRecord(
                    step=step,
                    layer_id=layer_id,
                    grad_norm=_l2([parameter.grad for parameter in parameters if parameter.grad is not None]),
                    param_norm=_l2(parameters),
                    param_drift=drift,
                )
                self.trace.append(record)
                records.append(record)
        return records

    def on_backward_finished(self, step: int, **kwargs: Any) -> None:
        self.record_step(step)

    def attach(self, signal: Signal) -> NormWatch:
        signal.connect(self.on_backward_finished)
        self._signal = signal
        LOG.debug(f"watching {', '.join(self.trace.watched_layers)}")
        return self

    def detach(self) -> NormTrace:
        if self._signal is not None:
            self._signal.disconnect(self.on_backward_finished)
            self._signal = None
        return self.trace


def watch(model: nn.Module, selectors: Sequence[str], signal: Optional[Signal] = None) -> NormWatch:
    handle = NormWatch(model, selectors)
    return handle if signal is None else handle.attach(signal)


def record_step(handle: NormWatch, step: int) -> List[NormRecord]:
    return handle.record_step(step)
