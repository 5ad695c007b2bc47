from .config import NetworkConfig, TrainConfig
from .network import EncoderDecoder, NetworkState, bound_map, encode_decode
from .training import (
    FoldResult,
    LossRecord,
    adam_step,
    load_state,
    loss_history_frame,
    predict,
    predict_held_out,
    reconstruction_loss,
    save_state,
    train,
)

__all__ = [
    'NetworkConfig',
    'TrainConfig',
    'EncoderDecoder',
    'NetworkState',
    'bound_map',
    'encode_decode',
    'FoldResult',
    'LossRecord',
    'adam_step',
    'load_state',
    'loss_history_frame',
    'predict',
    'predict_held_out',
    'reconstruction_loss',
    'save_state',
    'train',
]
