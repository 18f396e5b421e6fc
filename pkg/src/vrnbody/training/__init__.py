"""Loss, training loop, evaluation and the ablation runner."""

from .ablation import PUBLISHED_IOU, AblationReport, AblationRow, run_ablation
from .loss import multitap_loss, voxel_bce_loss
from .trainer import (
    EpochRecord,
    RunLog,
    TrainConfig,
    evaluate,
    load_samples,
    load_trained_network,
    restore_checkpoint,
    split_indices,
    train,
)

__all__ = [
    "PUBLISHED_IOU",
    "AblationReport",
    "AblationRow",
    "EpochRecord",
    "RunLog",
    "TrainConfig",
    "evaluate",
    "load_samples",
    "load_trained_network",
    "multitap_loss",
    "restore_checkpoint",
    "run_ablation",
    "split_indices",
    "train",
    "voxel_bce_loss",
]
