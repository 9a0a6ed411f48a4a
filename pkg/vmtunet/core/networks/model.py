"""The unrolled Cahn-Hilliard segmentation network.

    u^0     = Sig(W0 * f + b0)
    G       = Sig(F_net(f))                      evaluated once per forward
    v^n     = eps1 Lap(u^n) - W'(u^n) / eps2
    u^{n+1} = u^n - tau Lap_h(v^n) - tau G        n = 0..M-1
    P(f)    = Sig(W_out * u^M + b_out)            1x1 conv
"""

from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from vmtunet.core.autodiff import ops
from vmtunet.core.autodiff.tape import Param, Tensor, as_tensor
from vmtunet.core.errors import DecodeError, InputTooSmall, ShapeMismatch
from vmtunet.core.field.field import ImageTensor, as_padding
from vmtunet.core.models.models import FNetKind, NetworkSpec, Scheme, TrainConfig
from vmtunet.core.networks.builders import (
    FLATCNN_WIDTHS,
    build_dense_cnn,
    build_flatcnn,
    build_residual_cnn,
    build_unet,
)
from vmtunet.core.networks.runtime import Network, he_normal


def build_force_spec(config: TrainConfig) -> NetworkSpec:
    widths = config.flat_widths or list(FLATCNN_WIDTHS)
    if config.f_net == FNetKind.UNET:
        return build_unet(config.channels, config.in_channels, 1)
    if config.f_net == FNetKind.FLATCNN:
        return build_flatcnn(widths, config.in_channels, 1)
    if config.f_net == FNetKind.RESIDUAL:
        return build_residual_cnn(widths, config.in_channels, 1)
    if config.f_net == FNetKind.DENSE:
        return build_dense_cnn(widths, config.in_channels, 1)
    raise ValueError(f"unknown force network {config.f_net}")


@dataclass
class ForwardStates:
    u0: Tensor
    force: Tensor
    u: List[Tensor]
    output: Tensor


class VMTUNetModel:
    def __init__(
        self,
        config: TrainConfig,
        f_spec: Optional[NetworkSpec] = None,
        seed: Optional[int] = None,
    ):
        if config.blocks < 1:
            raise ValueError("the model needs at least one block")
        self.config = config
        self.params = config.ch_params()
        self.padding = as_padding(config.bc)
        rng = np.random.default_rng(config.seed if seed is None else seed)
        d = config.in_channels
        self.w_in = Param("init.weight", he_normal(rng, 1, d, 3))
        self.b_in = Param("init.bias", np.zeros(1))
        self.f_net = Network(f_spec or build_force_spec(config), rng, prefix="force.")
        self.w_out = Param("final.weight", he_normal(rng, 1, 1, 1))
        self.b_out = Param("final.bias", np.zeros(1))
        self.force_evaluations = 0

    @property
    def blocks(self) -> int:
        return self.params.M

    def parameters(self) -> List[Param]:
        return [self.w_in, self.b_in] + self.f_net.parameters() + [self.w_out, self.b_out]

    def train(self) -> None:
        self.f_net.train()

    def eval(self) -> None:
        self.f_net.eval()

    def force(self, f: Tensor) -> Tensor:
        """G = Sig(F_net(f)); a network that already ends in a sigmoid is used as is."""
        self.force_evaluations += 1
        out = self.f_net(f)
        return out if self.f_net.ends_in_sigmoid else ops.sigmoid(out)

    def laplacian(self, u: Tensor) -> Tensor:
        p = self.params
        if self.config.scheme == Scheme.TFPM:
            return ops.tfpm_laplacian_node(
                u, p.eps1, p.eps2, p.h, self.config.bc, self.config.freeze_tfpm_center
            )
        return ops.fdm_laplacian_node(u, p.h, self.config.bc)

    def block(self, u: Tensor, force: Tensor) -> Tensor:
        p = self.params
        v = ops.sub(
            ops.scalar_mul(self.laplacian(u), p.eps1),
            ops.scalar_mul(ops.double_well_prime_node(u), 1.0 / p.eps2),
        )
        lap_v = ops.fdm_laplacian_node(v, p.h, self.config.bc)
        return ops.sub(ops.sub(u, ops.scalar_mul(lap_v, p.tau)), ops.scalar_mul(force, p.tau))

    def check_input(self, f: Tensor) -> None:
        if f.data.ndim != 4 or f.shape[1] != self.config.in_channels:
            raise InputTooSmall(
                f"expected (N, {self.config.in_channels}, H, W) input, got {f.shape}"
            )
        factor = 2**self.f_net.spec.levels
        h, w = f.shape[2], f.shape[3]
        if h < 3 or w < 3 or h % factor or w % factor:
            raise InputTooSmall(f"H and W must be >= 3 and divisible by {factor}, got {h}x{w}")

    def forward_states(self, f: Tensor) -> ForwardStates:
        self.check_input(f)
        u = ops.sigmoid(ops.conv2d(f, self.w_in, self.b_in, padding=self.padding))
        u0 = u
        force = self.force(f)
        states = []
        for _ in range(self.blocks):
            u = self.block(u, force)
            states.append(u)
        out = ops.sigmoid(ops.conv2d(u, self.w_out, self.b_out))
        return ForwardStates(u0=u0, force=force, u=states, output=out)

    def forward(self, f: Tensor) -> Tensor:
        return self.forward_states(f).output

    __call__ = forward

    def state_dict(self):
        state = {p.name: p.data for p in (self.w_in, self.b_in, self.w_out, self.b_out)}
        state.update(self.f_net.state_dict())
        return state

    def load_state_dict(self, state, source: Optional[str] = None) -> None:
        for p in (self.w_in, self.b_in, self.w_out, self.b_out):
            if p.name not in state:
                raise DecodeError(source or "<state>", f"missing tensor '{p.name}'")
            if np.shape(state[p.name]) != p.shape:
                raise ShapeMismatch(f"'{p.name}' has shape {np.shape(state[p.name])}, expected {p.shape}")
            p.data = np.array(state[p.name], dtype=np.float64)
        self.f_net.load_state_dict(state, source)


def vmtunet_forward(model: VMTUNetModel, f: Union[ImageTensor, np.ndarray, Tensor]) -> Tensor:
    """P(f) for one image (H x W x D) or an already batched (N, D, H, W) input."""
    if isinstance(f, ImageTensor):
        x = Tensor(f.to_batch())
    else:
        x = as_tensor(f)
    return model(x)
