from vmtunet.core.training.experiments import ablate, sweep
from vmtunet.core.training.metrics import (
    dice,
    dice_scores,
    overlap_accuracy,
    pixel_accuracy,
    threshold,
)
from vmtunet.core.training.trainer import TrainHistory, evaluate, train

__all__ = [
    "TrainHistory",
    "ablate",
    "dice",
    "dice_scores",
    "evaluate",
    "overlap_accuracy",
    "pixel_accuracy",
    "sweep",
    "threshold",
    "train",
]
