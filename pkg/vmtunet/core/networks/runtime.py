from typing import Dict, List, Optional

import numpy as np

from vmtunet.core.autodiff import ops
from vmtunet.core.autodiff.ops import BatchNormState
from vmtunet.core.autodiff.tape import Param, Tensor
from vmtunet.core.errors import DecodeError, ShapeMismatch
from vmtunet.core.models.models import LayerKind, LayerSpec, NetworkSpec
from vmtunet.core.networks.builders import INPUT, infer_shapes, validate_spec


def he_normal(rng: np.random.Generator, cout: int, cin: int, k: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / (cin * k * k)), size=(cout, cin, k, k))


class Network:
    """Instantiates the Params of a NetworkSpec and evaluates it on tensors."""

    def __init__(self, spec: NetworkSpec, rng: np.random.Generator, prefix: str = ""):
        validate_spec(spec)
        self.spec = spec
        self.prefix = prefix
        self.training = True
        self._params: Dict[str, Dict[str, Param]] = {}
        self.bn_states: Dict[str, BatchNormState] = {}
        for layer in spec.layers:
            if layer.kind == LayerKind.CONV:
                self._params[layer.name] = {
                    "weight": Param(
                        self._qualified(layer, "weight"),
                        he_normal(rng, layer.out_channels, layer.in_channels, layer.kernel),
                    ),
                    "bias": Param(self._qualified(layer, "bias"), np.zeros(layer.out_channels)),
                }
            elif layer.kind == LayerKind.BATCH_NORM:
                self._params[layer.name] = {
                    "gamma": Param(self._qualified(layer, "gamma"), np.ones(layer.out_channels)),
                    "beta": Param(self._qualified(layer, "beta"), np.zeros(layer.out_channels)),
                }
                self.bn_states[layer.name] = BatchNormState(layer.out_channels)

    def _qualified(self, layer: LayerSpec, field: str) -> str:
        return f"{self.prefix}{layer.name}.{field}"

    @property
    def ends_in_sigmoid(self) -> bool:
        out = next(layer for layer in self.spec.layers if layer.name == self.spec.output)
        return out.kind == LayerKind.SIGMOID

    def parameters(self) -> List[Param]:
        return [p for group in self._params.values() for p in group.values()]

    def train(self) -> None:
        self.training = True

    def eval(self) -> None:
        self.training = False

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise ShapeMismatch(
                f"{self.spec.name} expects (N, {self.spec.in_channels}, H, W), got {x.shape}"
            )
        infer_shapes(self.spec, x.shape[2], x.shape[3])
        values: Dict[str, Tensor] = {INPUT: x}
        for layer in self.spec.layers:
            args = [values[src] for src in layer.inputs]
            values[layer.name] = self._apply(layer, args)
        return values[self.spec.output]

    __call__ = forward

    def _apply(self, layer: LayerSpec, args: List[Tensor]) -> Tensor:
        kind = layer.kind
        if kind == LayerKind.CONV:
            p = self._params[layer.name]
            return ops.conv2d(args[0], p["weight"], p["bias"], padding=layer.padding)
        if kind == LayerKind.BATCH_NORM:
            p = self._params[layer.name]
            return ops.batch_norm_2d(
                args[0], p["gamma"], p["beta"], self.bn_states[layer.name], self.training
            )
        if kind == LayerKind.RELU:
            return ops.relu(args[0])
        if kind == LayerKind.SIGMOID:
            return ops.sigmoid(args[0])
        if kind == LayerKind.MAXPOOL:
            return ops.maxpool2(args[0])
        if kind == LayerKind.UPSAMPLE:
            return ops.upsample_nearest2(args[0])
        if kind == LayerKind.CONCAT:
            return ops.concat_channels(*args)
        if kind == LayerKind.ADD:
            out = args[0]
            for other in args[1:]:
                out = ops.add(out, other)
            return out
        raise ValueError(f"unknown layer kind {kind}")

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Parameters plus batch-norm running statistics, keyed by qualified name."""
        state = {p.name: p.data for p in self.parameters()}
        for name, bn in self.bn_states.items():
            state[f"{self.prefix}{name}.running_mean"] = bn.mean
            state[f"{self.prefix}{name}.running_var"] = bn.var
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], source: Optional[str] = None) -> None:
        def fetch(key: str, shape) -> np.ndarray:
            if key not in state:
                raise DecodeError(source or "<state>", f"missing tensor '{key}'")
            if state[key].shape != tuple(shape):
                raise ShapeMismatch(f"'{key}' has shape {state[key].shape}, expected {shape}")
            return np.array(state[key], dtype=np.float64)

        for p in self.parameters():
            p.data = fetch(p.name, p.shape)
        for name, bn in self.bn_states.items():
            bn.mean = fetch(f"{self.prefix}{name}.running_mean", bn.mean.shape)
            bn.var = fetch(f"{self.prefix}{name}.running_var", bn.var.shape)
