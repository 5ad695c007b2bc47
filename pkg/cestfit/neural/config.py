from typing import List

from pydantic import BaseModel, Field, PositiveFloat, model_validator

from ..config import DEFAULT_SEED
from ..errors import ConfigError
from ..models import ModelKind

NETWORK_PRESETS = {
    "paper": dict(layers=8, heads=8, hidden=1024, mlp_dim=1024, decoder_channels=[512, 256, 128, 64]),
    "desk": dict(layers=2, heads=4, hidden=64, mlp_dim=64, decoder_channels=[32, 16]),
}

# (learning rate, Lorentzian epochs, epochs for the other models)
TRAIN_PRESETS = {
    "paper": (1e-5, 200, 1000),
    "desk": (1e-3, 100, 300),
}


class NetworkConfig(BaseModel):
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    hidden: int = Field(default=64, ge=1)
    mlp_dim: int = Field(default=64, ge=1)
    decoder_channels: List[int] = Field(default_factory=lambda: [32, 16])

    @model_validator(mode="after")
    def _check(self):
        if self.hidden % self.heads:
            raise ValueError(f"heads ({self.heads}) must divide hidden ({self.hidden})")
        if not self.decoder_channels or min(self.decoder_channels) < 1:
            raise ValueError("decoder_channels must be a non-empty list of positive sizes")
        return self

    @classmethod
    def preset(cls, name: str) -> "NetworkConfig":
        if name not in NETWORK_PRESETS:
            raise ConfigError(f"unknown network preset {name!r}; choose from {sorted(NETWORK_PRESETS)}")
        return cls(**NETWORK_PRESETS[name])


class TrainConfig(BaseModel):
    epochs: int = Field(default=300, ge=1)
    learning_rate: PositiveFloat = 1e-3
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: PositiveFloat = 1e-8
    folds: int = Field(default=5, ge=2)
    batch_size: int = Field(default=32, ge=1)
    seed: int = DEFAULT_SEED
    # intra-op threads while training; reductions change order with the thread count
    threads: int = Field(default=1, ge=1)

    @classmethod
    def preset(cls, kind, name: str = "desk", **overrides) -> "TrainConfig":
        if name not in TRAIN_PRESETS:
            raise ConfigError(f"unknown training preset {name!r}; choose from {sorted(TRAIN_PRESETS)}")
        lr, lorentzian_epochs, epochs = TRAIN_PRESETS[name]
        if ModelKind(kind) == ModelKind.LORENTZIAN:
            epochs = lorentzian_epochs
        return cls(**{"learning_rate": lr, "epochs": epochs, **overrides})
