"""Dense float64 autodiff, layers, NAdam and checkpoints."""

from .checkpoint import load_parameters, read_checkpoint, save_parameters
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    LSTM,
    MLP,
    Attention,
    Conv1d,
    LayerNorm,
    LayerSpec,
    Linear,
    Module,
    TransformerBlock,
    build_layer,
    exact_attention,
    forward,
    nystrom_attention,
)
from .nadam import Nadam, NadamState, NonFiniteGradient, nadam_step
from .tensor import Parameter, ShapeError, Tensor, backward

__all__ = [
    "Attention", "Conv1d", "GradCheckReport", "LSTM", "LayerNorm", "LayerSpec", "Linear",
    "MLP", "Module", "Nadam", "NadamState", "NonFiniteGradient", "Parameter", "ShapeError",
    "Tensor", "TransformerBlock", "backward", "build_layer", "exact_attention", "forward",
    "grad_check", "load_parameters", "nadam_step", "nystrom_attention", "read_checkpoint",
    "save_parameters",
]
