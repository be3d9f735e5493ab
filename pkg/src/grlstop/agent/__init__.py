from .checkpoint import CheckpointError, PolicyCheckpoint, load_checkpoint, save_checkpoint
from .inference import policy_stop
from .policy import PolicyNetwork
from .ppo import TrainerConfig, TrainingDiverged, TrainResult, train

__all__ = [
    "CheckpointError",
    "PolicyCheckpoint",
    "PolicyNetwork",
    "TrainResult",
    "TrainerConfig",
    "TrainingDiverged",
    "load_checkpoint",
    "policy_stop",
    "save_checkpoint",
    "train",
]
