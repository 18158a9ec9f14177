from .bigat import (
    ModelConfig,
    Prediction,
    attention_coefficients,
    bigat_forward,
    event_loss,
    gat_layer_forward,
    init_params,
    loss_and_grad,
    swap_directions,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .train import TrainingError, epoch_order, evaluate, train_local

__all__ = [
    "CheckpointError", "ModelConfig", "Prediction", "TrainingError", "attention_coefficients", "bigat_forward",
    "epoch_order", "evaluate", "event_loss", "gat_layer_forward", "init_params", "load_checkpoint",
    "loss_and_grad", "save_checkpoint", "swap_directions", "train_local",
]
