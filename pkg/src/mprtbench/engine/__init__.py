from .architectures import ARCH_NAMES, build_lenet, build_mini_resnet, build_model
from .io import load_model, save_model
from .layers import (GUIDED, STANDARD, Conv2D, Dense, Flatten, Layer, MaxPool2D, ReLU,
                     SkipAdd, Softmax, softmax)
from .model import (ForwardTrace, Model, accuracy, forward, input_gradient,
                    input_gradient_batch, logits_batch, predict_batch)
from .train import TrainConfig, cross_entropy, train

__all__ = [
    "ARCH_NAMES", "build_lenet", "build_mini_resnet", "build_model",
    "load_model", "save_model",
    "GUIDED", "STANDARD", "Conv2D", "Dense", "Flatten", "Layer", "MaxPool2D",
    "ReLU", "SkipAdd", "Softmax", "softmax",
    "ForwardTrace", "Model", "accuracy", "forward", "input_gradient",
    "input_gradient_batch", "logits_batch", "predict_batch",
    "TrainConfig", "cross_entropy", "train",
]
