import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from ..errors import LengthMismatch, ShapeMismatch
from ..models import ParamBounds
from .config import NetworkConfig, TrainConfig

DTYPE = torch.float64


class EncoderDecoder(nn.Module):
    """
    Transformer encoder over offset tokens followed by a 1-D convolutional
    decoder and an MLP head. Input (N, C, T): C saturation amplitudes as
    token channels, T offsets as tokens. Output (N, P) raw values.
    """

    def __init__(self, n_channels: int, n_tokens: int, n_outputs: int, cfg: NetworkConfig):
        super().__init__()
        self.embed = nn.Linear(n_channels, cfg.hidden)
        self.position = nn.Parameter(torch.zeros(1, n_tokens, cfg.hidden))
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.hidden,
            nhead=cfg.heads,
            dim_feedforward=cfg.mlp_dim,
            dropout=0.0,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.layers, enable_nested_tensor=False)

        blocks = []
        width = cfg.hidden
        for channels in cfg.decoder_channels:
            blocks += [nn.Conv1d(width, channels, kernel_size=3, padding=1), nn.GELU()]
            width = channels
        self.decoder = nn.Sequential(*blocks)
        self.head = nn.Sequential(nn.Linear(width, cfg.mlp_dim), nn.GELU(), nn.Linear(cfg.mlp_dim, n_outputs))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        tokens = self.embed(x.transpose(1, 2)) + self.position
        hidden = self.encoder(tokens)
        features = self.decoder(hidden.transpose(1, 2))
        return self.head(features.mean(dim=2))


def init_weights(network: nn.Module, seed: int):
    """
    Uniform in ±1/sqrt(fan_in) for every weight matrix or kernel, drawn from
    a generator seeded with `seed`; norm gains start at 1 and biases at 0.
    """
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, param in network.named_parameters():
            if param.dim() < 2:
                param.fill_(1.0 if name.endswith("weight") else 0.0)
                continue
            bound = 1.0 / math.sqrt(param[0].numel())
            param.copy_(torch.rand(param.shape, generator=generator, dtype=param.dtype) * 2.0 * bound - bound)


@dataclass
class NetworkState:
    network: EncoderDecoder
    optimizer: torch.optim.Adam
    net_cfg: NetworkConfig
    train_cfg: TrainConfig
    n_channels: int
    n_tokens: int
    n_outputs: int
    step: int = 0

    @classmethod
    def create(cls, n_channels: int, n_tokens: int, n_outputs: int, net_cfg: NetworkConfig,
               train_cfg: TrainConfig, seed: Optional[int] = None) -> "NetworkState":
        seed = train_cfg.seed if seed is None else seed
        # module constructors draw from the global generator; keep the caller's stream intact
        with torch.random.fork_rng(devices=[]):
            network = EncoderDecoder(n_channels, n_tokens, n_outputs, net_cfg).to(DTYPE)
        init_weights(network, seed)
        optimizer = torch.optim.Adam(
            network.parameters(),
            lr=train_cfg.learning_rate,
            betas=(train_cfg.beta1, train_cfg.beta2),
            eps=train_cfg.eps,
        )
        n_weights = sum(p.numel() for p in network.parameters())
        logging.debug(f"network with {n_weights} weights for input ({n_channels}, {n_tokens}) -> {n_outputs}")
        return cls(network, optimizer, net_cfg, train_cfg, n_channels, n_tokens, n_outputs)


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=float), dtype=DTYPE)


def encode_decode(state: NetworkState, x) -> torch.Tensor:
    """Raw network output f(x), shape (N, P), for a batch of curves (N, C, T)."""
    x = as_tensor(x)
    expected = (state.n_channels, state.n_tokens)
    if x.dim() != 3 or tuple(x.shape[1:]) != expected:
        raise ShapeMismatch(f"network expects input (N, {expected[0]}, {expected[1]}), got {tuple(x.shape)}")
    return state.network(x)


def bound_map(f_x, bounds: ParamBounds):
    """p = c + d * tanh(f(x)); numpy in, numpy out, tensors stay differentiable."""
    if f_x.shape[-1] != len(bounds):
        raise LengthMismatch(f"raw output has {f_x.shape[-1]} entries, bounds have {len(bounds)}")
    if isinstance(f_x, torch.Tensor):
        center = torch.from_numpy(np.array(bounds.center, copy=True)).to(f_x.dtype)
        deviation = torch.from_numpy(np.array(bounds.deviation, copy=True)).to(f_x.dtype)
        return center + deviation * torch.tanh(f_x)
    return bounds.center + bounds.deviation * np.tanh(np.asarray(f_x, dtype=float))
