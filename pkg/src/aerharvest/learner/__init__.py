from .ddqn import (
    DDQNLearner,
    Hyperparams,
    NonFiniteLossError,
    ddqn_loss,
    ddqn_targets,
    greedy_action,
    soft_update,
    softmax_action,
    softmax_probabilities,
)
from .network import ModelFormatError, NetworkSpec, QNetwork, load_model, save_model
from .replay import Batch, Experience, ReplayMemory

__all__ = [
    "Batch",
    "DDQNLearner",
    "Experience",
    "Hyperparams",
    "ModelFormatError",
    "NetworkSpec",
    "NonFiniteLossError",
    "QNetwork",
    "ReplayMemory",
    "ddqn_loss",
    "ddqn_targets",
    "greedy_action",
    "load_model",
    "save_model",
    "soft_update",
    "softmax_action",
    "softmax_probabilities",
]
