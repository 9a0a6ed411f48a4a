from vmtunet.core.autodiff.checkpoint import load_checkpoint, load_into, save_checkpoint
from vmtunet.core.autodiff.gradcheck import check_gradients, numeric_gradient
from vmtunet.core.autodiff.losses import bce, get_loss, hinge, l2
from vmtunet.core.autodiff.ops import (
    BatchNormState,
    add,
    batch_norm_2d,
    concat_channels,
    conv2d,
    double_well_prime_node,
    fdm_laplacian_node,
    maxpool2,
    mul,
    relu,
    scalar_mul,
    scale_shift,
    sigmoid,
    square,
    stack_batch,
    sub,
    sum_all,
    tfpm_laplacian_node,
    upsample_nearest2,
)
from vmtunet.core.autodiff.optim import Adam, AdamState, adam_step
from vmtunet.core.autodiff.tape import Param, Tape, Tensor, current_tape, zero_grad

__all__ = [
    "Adam",
    "AdamState",
    "BatchNormState",
    "Param",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "batch_norm_2d",
    "bce",
    "check_gradients",
    "concat_channels",
    "conv2d",
    "current_tape",
    "double_well_prime_node",
    "fdm_laplacian_node",
    "get_loss",
    "hinge",
    "l2",
    "load_checkpoint",
    "load_into",
    "maxpool2",
    "mul",
    "numeric_gradient",
    "relu",
    "save_checkpoint",
    "scalar_mul",
    "scale_shift",
    "sigmoid",
    "square",
    "stack_batch",
    "sub",
    "sum_all",
    "tfpm_laplacian_node",
    "upsample_nearest2",
    "zero_grad",
]
