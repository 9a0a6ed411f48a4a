from typing import Callable, Dict, Sequence

import numpy as np

from vmtunet.core.autodiff.tape import Tape, Tensor


def numeric_gradient(loss_fn: Callable[[], Tensor], tensor: Tensor, step: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar ``loss_fn()`` w.r.t. every entry of ``tensor``."""
    tensor.data = np.ascontiguousarray(tensor.data)
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = float(loss_fn().data)
        flat[i] = original - step
        minus = float(loss_fn().data)
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * step)
    return grad


def check_gradients(
    loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor], step: float = 1e-5
) -> Dict[str, float]:
    """
    Compare tape gradients with central differences.

    Returns, per tensor, ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12).
    ``loss_fn`` must rebuild the computation from the tensors' current data.
    """
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    errors = {}
    for idx, t in enumerate(tensors):
        analytic = tape.grad(t).copy()
        numeric = numeric_gradient(loss_fn, t, step)
        scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        errors[t.name or f"input{idx}"] = float(np.linalg.norm(analytic - numeric) / scale)
    return errors
