import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from ..errors import ConfigError
from ..folds import fold_seed, fold_splits
from ..models import ModelInputs, ModelSpec
from .config import NetworkConfig, TrainConfig
from .network import NetworkState, as_tensor, bound_map, encode_decode

CHECKPOINT_VERSION = 1


@dataclass
class LossRecord:
    fold: int
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class FoldResult:
    fold: int
    state: NetworkState
    history: List[LossRecord]
    train_index: np.ndarray
    test_index: np.ndarray


def tensor_inputs(inputs: ModelInputs) -> ModelInputs:
    return inputs.map(as_tensor)


def reconstruction_loss(p, x, spec: ModelSpec, inputs: ModelInputs):
    """Mean over batch, curves and offsets of (M(p) - x)^2."""
    if isinstance(p, torch.Tensor):
        return torch.mean((spec.evaluate(p, tensor_inputs(inputs)) - as_tensor(x)) ** 2)
    p = np.asarray(p, dtype=float)
    return float(np.mean((spec.evaluate(p, inputs) - np.asarray(x, dtype=float)) ** 2))


def adam_step(state: NetworkState, gradients: Optional[Sequence[torch.Tensor]] = None):
    """
    One Adam update (bias-corrected, hyperparameters from the state's train
    config). Gradients are taken from the weights' .grad slots unless given.
    """
    if gradients is not None:
        params = list(state.network.parameters())
        if len(gradients) != len(params):
            raise ValueError(f"got {len(gradients)} gradients for {len(params)} weights")
        for param, grad in zip(params, gradients):
            if tuple(grad.shape) != tuple(param.shape):
                raise ValueError(f"gradient shape {tuple(grad.shape)} does not match weight {tuple(param.shape)}")
            param.grad = grad.detach().to(param.dtype).clone()
    state.optimizer.step()
    state.step += 1
    return state


def _batch_loss(state: NetworkState, x: torch.Tensor, spec: ModelSpec, inputs: ModelInputs):
    return reconstruction_loss(bound_map(encode_decode(state, x), spec.bounds), x, spec, inputs)


def _held_out_loss(state: NetworkState, x: torch.Tensor, spec: ModelSpec, inputs: ModelInputs) -> float:
    with torch.no_grad():
        return _batch_loss(state, x, spec, inputs).item()


@contextmanager
def pinned_threads(n: int):
    previous = torch.get_num_threads()
    torch.set_num_threads(n)
    try:
        yield
    finally:
        torch.set_num_threads(previous)


def train(targets, spec: ModelSpec, inputs: ModelInputs, net_cfg: NetworkConfig, train_cfg: TrainConfig,
          on_epoch: Optional[Callable[[LossRecord], None]] = None) -> List[FoldResult]:
    """
    Self-supervised k-fold training on the target curves (N, C, T) only.
    Fold f trains a fresh network seeded with seed + f on the other folds
    and records the per-epoch training loss and the held-out loss.
    """
    data = np.asarray(targets, dtype=float)
    if data.ndim != 3:
        raise ValueError(f"targets must have shape (N, C, T), got {data.shape}")
    splits = fold_splits(len(data), train_cfg.folds, train_cfg.seed)
    x_all = as_tensor(data)
    inputs_t = tensor_inputs(inputs)

    with pinned_threads(train_cfg.threads):
        return [_train_fold(fold, train_index, test_index, x_all, spec, inputs_t, net_cfg, train_cfg, on_epoch)
                for fold, (train_index, test_index) in enumerate(splits)]


def _train_fold(fold: int, train_index: np.ndarray, test_index: np.ndarray, x_all: torch.Tensor, spec: ModelSpec,
                inputs_t: ModelInputs, net_cfg: NetworkConfig, train_cfg: TrainConfig,
                on_epoch: Optional[Callable[[LossRecord], None]]) -> FoldResult:
    seed = fold_seed(train_cfg.seed, fold)
    state = NetworkState.create(x_all.shape[1], x_all.shape[2], len(spec.bounds), net_cfg, train_cfg, seed=seed)
    generator = torch.Generator().manual_seed(seed)
    history = []
    for epoch in range(train_cfg.epochs):
        state.network.train()
        order = train_index[torch.randperm(len(train_index), generator=generator).numpy()]
        total = 0.0
        for start in range(0, len(order), train_cfg.batch_size):
            batch = x_all[order[start:start + train_cfg.batch_size]]
            state.optimizer.zero_grad()
            loss = _batch_loss(state, batch, spec, inputs_t)
            loss.backward()
            adam_step(state)
            total += loss.item() * len(batch)
        state.network.eval()
        record = LossRecord(fold, epoch, total / len(order), _held_out_loss(state, x_all[test_index], spec, inputs_t))
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    logging.info(f"fold {fold}: train loss {history[0].train_loss:.3e} -> {history[-1].train_loss:.3e}, "
                 f"held-out {history[-1].val_loss:.3e}")
    return FoldResult(fold, state, history, train_index, test_index)


def predict(state: NetworkState, x, spec: ModelSpec, inputs: ModelInputs) -> Tuple[np.ndarray, np.ndarray]:
    """Bounded parameters (N, P) and the reconstructed curves (N, C, T)."""
    state.network.eval()
    with torch.no_grad():
        p = bound_map(encode_decode(state, x), spec.bounds)
        curves = spec.evaluate(p, tensor_inputs(inputs))
    return p.numpy().copy(), curves.numpy().copy()


def predict_held_out(folds: Sequence[FoldResult], targets, spec: ModelSpec,
                     inputs: ModelInputs) -> np.ndarray:
    """Each sample predicted by the fold network that never trained on it."""
    data = np.asarray(targets, dtype=float)
    params = np.full((len(data), len(spec.bounds)), np.nan)
    for fold in folds:
        params[fold.test_index], _ = predict(fold.state, data[fold.test_index], spec, inputs)
    return params


def loss_history_frame(folds: Sequence[FoldResult]) -> pd.DataFrame:
    rows = [vars(record) for fold in folds for record in fold.history]
    return pd.DataFrame(rows, columns=["fold", "epoch", "train_loss", "val_loss"])


def save_state(state: NetworkState, path, spec: Optional[ModelSpec] = None, test_index=None):
    payload = {
        "version": CHECKPOINT_VERSION,
        "net_cfg": state.net_cfg.model_dump(mode="json"),
        "train_cfg": state.train_cfg.model_dump(mode="json"),
        "shape": [state.n_channels, state.n_tokens, state.n_outputs],
        "weights": state.network.state_dict(),
        "optimizer": state.optimizer.state_dict(),
        "step": state.step,
        "model": spec.to_config().model_dump(mode="json") if spec is not None else None,
        "test_index": [int(i) for i in test_index] if test_index is not None else None,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    logging.debug(f"saved network state (step {state.step}) to {path}")


def load_state(path) -> Tuple[NetworkState, dict]:
    """Restore a checkpoint; returns the state and the raw payload (model config, test split)."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {payload.get('version')!r}")
    n_channels, n_tokens, n_outputs = payload["shape"]
    state = NetworkState.create(n_channels, n_tokens, n_outputs,
                                NetworkConfig(**payload["net_cfg"]), TrainConfig(**payload["train_cfg"]))
    state.network.load_state_dict(payload["weights"])
    state.optimizer.load_state_dict(payload["optimizer"])
    state.step = payload["step"]
    return state, payload
