from __future__ import annotations

from typing import Optional

from torch import nn

from fla_slt.models.features import FeatureSequence, Tap


class MlpAdapter(nn.Module):
    """Position-wise perceptron with one hidden layer; row j of the output depends on row j of the input only.

    Serves as the VL-Adapter (sign-wise features into the Light-T's textual space) and as the LLM-Adapter
    (features into the backend encoder's embedding space, replacing its word-embedding layer).
    """

    def __init__(self, in_dim: int, out_dim: int, input_tap: Tap, hidden_dim: Optional[int] = None) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.input_tap = input_tap
        self.hidden_dim = out_dim if hidden_dim is None else hidden_dim
        self.hidden = nn.Linear(in_dim, self.hidden_dim)
        self.activation = nn.ReLU()
        self.output = nn.Linear(self.hidden_dim, out_dim)

    def forward(self, features: FeatureSequence) -> FeatureSequence:
        features.expect(self.input_tap, self.in_dim)
        projected = self.output(self.activation(self.hidden(features.values)))
        return FeatureSequence.masked(projected, features.lengths, Tap.textual)
