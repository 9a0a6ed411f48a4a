from typing import Callable, Dict

import numpy as np

from vmtunet.core.autodiff.tape import Tensor, as_tensor, make_output
from vmtunet.core.errors import ShapeMismatch
from vmtunet.core.models.models import LossKind

BCE_CLAMP = 1e-7


def _check(kind: str, pred: Tensor, target: Tensor) -> None:
    if pred.shape != target.shape:
        raise ShapeMismatch(f"{kind}: prediction {pred.shape} vs target {target.shape}")


def bce(pred: Tensor, target) -> Tensor:
    """Mean binary cross-entropy with the prediction clamped to [1e-7, 1 - 1e-7]."""
    target = as_tensor(target)
    _check("bce", pred, target)
    t = target.data
    p = np.clip(pred.data, BCE_CLAMP, 1.0 - BCE_CLAMP)
    inside = (pred.data > BCE_CLAMP) & (pred.data < 1.0 - BCE_CLAMP)
    n = p.size
    value = -np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))

    def backward(g):
        return [g * inside * (-(t / p) + (1.0 - t) / (1.0 - p)) / n, None]

    return make_output("bce", (pred, target), np.array(value), backward)


def l2(pred: Tensor, target) -> Tensor:
    target = as_tensor(target)
    _check("l2", pred, target)
    diff = pred.data - target.data
    n = diff.size
    return make_output(
        "l2", (pred, target), np.array(np.mean(diff * diff)), lambda g: [g * 2.0 * diff / n, None]
    )


def hinge(pred: Tensor, target) -> Tensor:
    """Mean of max(0, 1 - s * (2p - 1)) with targets encoded as s = 2t - 1."""
    target = as_tensor(target)
    _check("hinge", pred, target)
    signs = 2.0 * target.data - 1.0
    margin = 1.0 - signs * (2.0 * pred.data - 1.0)
    active = margin > 0
    n = margin.size
    return make_output(
        "hinge",
        (pred, target),
        np.array(np.mean(np.where(active, margin, 0.0))),
        lambda g: [g * active * (-2.0 * signs) / n, None],
    )


LOSSES: Dict[LossKind, Callable[[Tensor, Tensor], Tensor]] = {
    LossKind.BCE: bce,
    LossKind.L2: l2,
    LossKind.HINGE: hinge,
}


def get_loss(kind: LossKind) -> Callable[[Tensor, Tensor], Tensor]:
    return LOSSES[LossKind(kind)]
