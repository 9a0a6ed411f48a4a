"""Differentiable operations on (N, C, H, W) tensors.

Every op computes its forward with numpy and records a closure that maps the
output cotangent to one cotangent per input.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from vmtunet.core.autodiff.tape import Tensor, as_tensor, make_output
from vmtunet.core.discretization.schemes import sech2_quarter, tfpm_lambda_c0, tfpm_laplacian_array
from vmtunet.core.errors import ShapeMismatch
from vmtunet.core.field.field import (
    PadKind,
    double_well_prime,
    double_well_second,
    fdm_laplacian_array,
    neighbor_sum,
    neighbor_sum_adjoint,
    pad_adjoint,
    pad_array,
)
from vmtunet.core.models.models import PaddingKind


def _same_shape(kind: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{kind}: shapes {a.shape} and {b.shape} differ")


def _require_4d(kind: str, x: Tensor) -> None:
    if x.data.ndim != 4:
        raise ShapeMismatch(f"{kind} expects an (N, C, H, W) tensor, got {x.shape}")


# Convolution


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: int = 1,
    padding: PadKind = PaddingKind.ZERO,
) -> Tensor:
    """
    Cross-correlation of ``x`` (N, C, H, W) with ``w`` (O, C, k, k), plus bias ``b`` (O,).

    The input is padded by k // 2 on each side with the given padding kind, so a
    stride-1 convolution keeps the spatial size.
    """
    _require_4d("conv2d", x)
    if w.data.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[2] % 2 == 0:
        raise ShapeMismatch(f"conv2d kernel must be (O, C, k, k) with odd k, got {w.shape}")
    if w.shape[1] != x.shape[1]:
        raise ShapeMismatch(f"conv2d: kernel expects {w.shape[1]} channels, input has {x.shape[1]}")
    if b is not None and b.shape != (w.shape[0],):
        raise ShapeMismatch(f"conv2d: bias shape {b.shape} does not match {w.shape[0]} outputs")
    if stride < 1:
        raise ValueError("stride must be >= 1")

    k = w.shape[2]
    width = k // 2
    xp = pad_array(x.data, width, padding) if width else x.data
    n, _, hp, wp = xp.shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"conv2d: input {x.shape} too small for kernel {k}")

    def window(arr, i, j):
        return arr[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]

    out = np.zeros((n, w.shape[0], ho, wo))
    for i in range(k):
        for j in range(k):
            out += np.einsum("nchw,oc->nohw", window(xp, i, j), w.data[:, :, i, j], optimize=True)
    if b is not None:
        out += b.data[None, :, None, None]

    def backward(g):
        dxp = np.zeros_like(xp)
        dw = np.zeros_like(w.data)
        for i in range(k):
            for j in range(k):
                dw[:, :, i, j] = np.einsum("nohw,nchw->oc", g, window(xp, i, j), optimize=True)
                window(dxp, i, j)[...] += np.einsum(
                    "nohw,oc->nchw", g, w.data[:, :, i, j], optimize=True
                )
        dx = pad_adjoint(dxp, width, padding) if width else dxp
        grads = [dx, dw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (x, w) if b is None else (x, w, b)
    return make_output("conv2d", inputs, out, backward)


# Pointwise


def sigmoid(x: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return make_output("sigmoid", (x,), y, lambda g: [g * y * (1.0 - y)])


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_output("relu", (x,), np.where(mask, x.data, 0.0), lambda g: [g * mask])


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return make_output("add", (a, b), a.data + b.data, lambda g: [g, g])


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return make_output("sub", (a, b), a.data - b.data, lambda g: [g, -g])


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    return make_output("mul", (a, b), a.data * b.data, lambda g: [g * b.data, g * a.data])


def scalar_mul(x: Tensor, s: float) -> Tensor:
    return make_output("scalar_mul", (x,), s * x.data, lambda g: [s * g])


def scale_shift(x: Tensor, scale: float, shift: float) -> Tensor:
    return make_output("scale_shift", (x,), scale * x.data + shift, lambda g: [scale * g])


def square(x: Tensor) -> Tensor:
    return make_output("square", (x,), x.data * x.data, lambda g: [2.0 * g * x.data])


def sum_all(x: Tensor) -> Tensor:
    return make_output("sum_all", (x,), np.array(x.data.sum()), lambda g: [np.full(x.shape, g)])


def double_well_prime_node(u: Tensor) -> Tensor:
    return make_output(
        "double_well_prime",
        (u,),
        double_well_prime(u.data),
        lambda g: [g * double_well_second(u.data)],
    )


# Batch normalization


@dataclass
class BatchNormState:
    """Running statistics of one batch-norm layer; not trained by the optimizer."""

    channels: int
    momentum: float = 0.9
    mean: np.ndarray = field(default=None)
    var: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.channels)
        if self.var is None:
            self.var = np.ones(self.channels)


def batch_norm_2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: Optional[BatchNormState] = None,
    training: bool = True,
    eps_bn: float = 1e-5,
) -> Tensor:
    """
    Per-channel normalization. Training uses batch statistics (biased variance)
    and folds them into ``state``; evaluation uses ``state``'s running averages.
    """
    _require_4d("batch_norm_2d", x)
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeMismatch(f"batch_norm_2d: gamma/beta must have shape ({c},)")
    g4 = gamma.data[None, :, None, None]
    b4 = beta.data[None, :, None, None]

    if training or state is None:
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        if training and state is not None:
            state.mean = state.momentum * state.mean + (1.0 - state.momentum) * mean
            state.var = state.momentum * state.var + (1.0 - state.momentum) * var
        inv_std = 1.0 / np.sqrt(var + eps_bn)
        xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
        m = x.data.size // c

        def backward(g):
            dxhat = g * g4
            sum_dxhat = dxhat.sum(axis=(0, 2, 3), keepdims=True)
            sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            dx = inv_std[None, :, None, None] / m * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
            return [dx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))]

    else:
        inv_std = 1.0 / np.sqrt(state.var + eps_bn)
        xhat = (x.data - state.mean[None, :, None, None]) * inv_std[None, :, None, None]

        def backward(g):
            dx = g * g4 * inv_std[None, :, None, None]
            return [dx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))]

    return make_output("batch_norm_2d", (x, gamma, beta), g4 * xhat + b4, backward)


# Resampling


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling; gradients go to the first maximum in row-major order."""
    _require_4d("maxpool2", x)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f"maxpool2 needs even H and W, got {h}x{w}")
    blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(n, c, h // 2, w // 2, 4)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        routed = np.zeros_like(flat)
        np.put_along_axis(routed, arg[..., None], g[..., None], axis=-1)
        routed = routed.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return [routed.reshape(n, c, h, w)]

    return make_output("maxpool2", (x,), out, backward)


def upsample_nearest2(x: Tensor) -> Tensor:
    _require_4d("upsample_nearest2", x)
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(g):
        n, c, h, w = g.shape
        return [g.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))]

    return make_output("upsample_nearest2", (x,), out, backward)


def concat_channels(*xs: Tensor) -> Tensor:
    if not xs:
        raise ShapeMismatch("concat_channels needs at least one tensor")
    for x in xs:
        _require_4d("concat_channels", x)
        if (x.shape[0],) + x.shape[2:] != (xs[0].shape[0],) + xs[0].shape[2:]:
            raise ShapeMismatch(f"concat_channels: {x.shape} incompatible with {xs[0].shape}")
    splits = np.cumsum([x.shape[1] for x in xs])[:-1]
    out = np.concatenate([x.data for x in xs], axis=1)
    return make_output("concat_channels", xs, out, lambda g: np.split(g, splits, axis=1))


# Laplacians


def tfpm_laplacian_node(
    u: Tensor, eps1: float, eps2: float, h: float, bc: PadKind, freeze_center: bool = False
) -> Tensor:
    """
    Tailored-finite-point Laplacian on the last two axes.

    The forward pass calls the solver's stencil so both agree bit for bit. The
    backward pass covers the neighbor sum and, unless ``freeze_center`` is set, the
    dependence of lambda and c0 on the center value.
    """
    data = u.data
    lam, c0 = tfpm_lambda_c0(data, eps1, eps2)
    lam2 = lam * lam
    s = neighbor_sum(data, bc)
    a = 0.5 * lam * h
    q_inv = sech2_quarter(a)
    out = tfpm_laplacian_array(data, eps1, eps2, h, bc)

    def backward(g):
        grad = neighbor_sum_adjoint(g * lam2 * q_inv, bc)
        if not freeze_center:
            q = 4.0 * data * data + 2.0
            dlam2 = 8.0 * data / (eps1 * eps2)
            dc0 = 24.0 * data / (q * q)
            dlam = dlam2 / (2.0 * lam)
            d_out = (
                dlam2 * (s - 4.0 * c0) * q_inv
                - 4.0 * lam2 * dc0 * q_inv
                + out * (-2.0 * np.tanh(a)) * (0.5 * h) * dlam
            )
            grad = grad + g * d_out
        return [grad]

    return make_output("tfpm_laplacian", (u,), out, backward)


def fdm_laplacian_node(v: Tensor, h: float, bc: PadKind) -> Tensor:
    def backward(g):
        return [(neighbor_sum_adjoint(g, bc) - 4.0 * g) / h**2]

    return make_output("fdm_laplacian", (v,), fdm_laplacian_array(v.data, h, bc), backward)


def stack_batch(items: Sequence[np.ndarray]) -> Tensor:
    """Concatenate (1, C, H, W) arrays, or (C, H, W) arrays, into one batch tensor."""
    arrays = [np.asarray(a, dtype=np.float64) for a in items]
    arrays = [a[None] if a.ndim == 3 else a for a in arrays]
    return as_tensor(np.concatenate(arrays, axis=0))
