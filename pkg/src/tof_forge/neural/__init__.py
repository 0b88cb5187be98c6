from .network import Network, NetworkConfig
from .training import (Adam, TrainConfig, adam_step, denormalize_depth, infer,
                       l1_masked_loss, lr_schedule, normalize_depth,
                       random_crop, train)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "Network", "NetworkConfig", "TrainConfig", "adam_step",
    "denormalize_depth", "infer", "l1_masked_loss", "load_checkpoint",
    "lr_schedule", "normalize_depth", "random_crop", "save_checkpoint",
    "train",
]
