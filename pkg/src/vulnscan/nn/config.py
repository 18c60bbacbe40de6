"""Classifier hyperparameters.

Defaults are the tuned values this detector ships with: four bidirectional
LSTM layers (one input-facing plus three hidden, 50 units per direction), a
single sigmoid output unit, Adam at 0.001, 50 epochs, batch 128, MSE loss,
dropout 0.2.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Any


@dataclass
class TrainingConfig:
    input_layer_units: int = 50
    hidden_layers: int = 3
    hidden_units: int = 50
    output_units: int = 1
    optimizer: str = "adam"
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 128
    loss: str = "mean_squared_error"
    dropout_rate: float = 0.2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def validate(self) -> None:
        if min(self.input_layer_units, self.hidden_layers, self.hidden_units,
               self.output_units, self.epochs, self.batch_size) < 1:
            raise ValueError("unit, layer, epoch and batch counts must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainingConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    @property
    def total_bilstm_layers(self) -> int:
        return 1 + self.hidden_layers
