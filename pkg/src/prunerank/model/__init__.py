from .config import ModelConfig, TrainConfig
from .network import (
    ForwardOutput,
    Params,
    TrainItem,
    backward,
    batch_gradients,
    forward,
    init_params,
    joint_loss,
    make_train_item,
    param_shapes,
    position_labels,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .training import AdamState, TrainLog, TrainStep, TrainingDiverged, train

__all__ = [
    "AdamState",
    "ForwardOutput",
    "ModelConfig",
    "Params",
    "TrainConfig",
    "TrainItem",
    "TrainLog",
    "TrainStep",
    "TrainingDiverged",
    "backward",
    "batch_gradients",
    "forward",
    "init_params",
    "joint_loss",
    "load_checkpoint",
    "make_train_item",
    "param_shapes",
    "position_labels",
    "save_checkpoint",
    "train",
]
