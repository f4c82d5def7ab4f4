from .layers import Conv2D, Dense, Flatten, MaxPool2x2, ReLU, Sigmoid, Tanh
from .model import Network, NetworkParams, bce_loss, imitation_loss
from .optim import Adam
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Conv2D", "Dense", "Flatten", "MaxPool2x2", "ReLU", "Sigmoid", "Tanh",
    "Network", "NetworkParams", "bce_loss", "imitation_loss",
    "Adam", "load_checkpoint", "save_checkpoint",
]
