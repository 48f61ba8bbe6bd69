from .adam import AdamConfig, AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import Conv1d, Dense, NearestUpsample, ReLU, Sigmoid
from .losses import l1_loss, rmse_loss
from .models import (
    LATENT_DIM,
    Autoencoder,
    Mapper,
    decode,
    encode,
    mapper_features,
    mapper_forward,
)
from .train import TrainConfig, encode_dataset, train_autoencoder, train_mapper

__all__ = [
    "AdamConfig",
    "AdamState",
    "adam_step",
    "load_checkpoint",
    "save_checkpoint",
    "Conv1d",
    "Dense",
    "NearestUpsample",
    "ReLU",
    "Sigmoid",
    "l1_loss",
    "rmse_loss",
    "LATENT_DIM",
    "Autoencoder",
    "Mapper",
    "decode",
    "encode",
    "mapper_features",
    "mapper_forward",
    "TrainConfig",
    "encode_dataset",
    "train_autoencoder",
    "train_mapper",
]
