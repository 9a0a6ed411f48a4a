"""Declarative layer graphs for the force approximator F(f) and its ablation variants."""

from typing import Dict, List, Sequence, Tuple

from vmtunet.core.errors import InputTooSmall, ShapeMismatch
from vmtunet.core.models.models import LayerKind, LayerSpec, NetworkSpec, PaddingKind

INPUT = "input"

# conv128, 4 x conv384, 5 x conv768, conv256, conv128; then a 1x1 conv and sigmoid.
# Same 13-layer shape as the 128/256/512 recipe, with the middle groups widened
# 1.5x so the stack lands near 30M trainable scalars.
FLATCNN_WIDTHS: Tuple[int, ...] = (128, 384, 384, 384, 384, 768, 768, 768, 768, 768, 256, 128)


class _GraphBuilder:
    def __init__(self, padding: PaddingKind):
        self.padding = padding
        self.layers: List[LayerSpec] = []

    def add(self, name: str, kind: LayerKind, inputs: Sequence[str], cin: int, cout: int, k: int = 1):
        self.layers.append(
            LayerSpec(
                name=name,
                kind=kind,
                inputs=list(inputs),
                in_channels=cin,
                out_channels=cout,
                kernel=k,
                padding=self.padding,
            )
        )
        return name

    def conv(self, name: str, src: str, cin: int, cout: int, k: int = 3) -> str:
        return self.add(name, LayerKind.CONV, [src], cin, cout, k)

    def conv_bn_relu(self, prefix: str, src: str, cin: int, cout: int) -> str:
        x = self.conv(f"{prefix}.conv", src, cin, cout, 3)
        x = self.add(f"{prefix}.bn", LayerKind.BATCH_NORM, [x], cout, cout)
        return self.add(f"{prefix}.relu", LayerKind.RELU, [x], cout, cout)


def build_unet(
    channels: Sequence[int],
    in_channels: int = 1,
    out_channels: int = 1,
    padding: PaddingKind = PaddingKind.ZERO,
) -> NetworkSpec:
    """
    Encoder-decoder with skip connections, fully described by ``channels``.

    Level s runs two conv3x3-BN-ReLU units at channels[s] and max-pools; the
    bottleneck doubles the last width; each decoder level upsamples, convolves down
    to channels[s], concatenates the skip and runs two more units. A 1x1 conv maps to
    ``out_channels``.
    """
    if not channels or any(c < 1 for c in channels):
        raise ValueError("channels must be a nonempty list of positive integers")
    if in_channels < 1 or out_channels < 1:
        raise ValueError("in_channels and out_channels must be >= 1")
    g = _GraphBuilder(padding)
    x, cin = INPUT, in_channels
    skips: List[Tuple[str, int]] = []
    for s, c in enumerate(channels):
        x = g.conv_bn_relu(f"enc{s}.a", x, cin, c)
        x = g.conv_bn_relu(f"enc{s}.b", x, c, c)
        skips.append((x, c))
        x = g.add(f"enc{s}.pool", LayerKind.MAXPOOL, [x], c, c)
        cin = c

    bottom = 2 * channels[-1]
    x = g.conv_bn_relu("bottleneck.a", x, cin, bottom)
    x = g.conv_bn_relu("bottleneck.b", x, bottom, bottom)
    cin = bottom

    for s in reversed(range(len(channels))):
        skip, c = skips[s]
        x = g.add(f"dec{s}.up", LayerKind.UPSAMPLE, [x], cin, cin)
        x = g.conv(f"dec{s}.upconv", x, cin, c, 3)
        x = g.add(f"dec{s}.cat", LayerKind.CONCAT, [skip, x], 2 * c, 2 * c)
        x = g.conv_bn_relu(f"dec{s}.a", x, 2 * c, c)
        x = g.conv_bn_relu(f"dec{s}.b", x, c, c)
        cin = c

    head = g.conv("head", x, cin, out_channels, 1)
    return _finish(f"unet{list(channels)}", in_channels, out_channels, len(channels), g, head)


def build_flatcnn(
    widths: Sequence[int] = FLATCNN_WIDTHS,
    in_channels: int = 1,
    out_channels: int = 1,
    padding: PaddingKind = PaddingKind.ZERO,
) -> NetworkSpec:
    """Plain stride-1 stack: no skips, no resampling, terminal sigmoid."""
    g = _GraphBuilder(padding)
    x, cin = INPUT, in_channels
    for i, w in enumerate(widths):
        x = g.conv_bn_relu(f"layer{i}", x, cin, w)
        cin = w
    x = g.conv("head", x, cin, out_channels, 1)
    out = g.add("head.sigmoid", LayerKind.SIGMOID, [x], out_channels, out_channels)
    return _finish("flatcnn", in_channels, out_channels, 0, g, out)


def build_residual_cnn(
    widths: Sequence[int] = FLATCNN_WIDTHS,
    in_channels: int = 1,
    out_channels: int = 1,
    padding: PaddingKind = PaddingKind.ZERO,
) -> NetworkSpec:
    """FlatCNN where every width-preserving unit adds its input back before the ReLU."""
    g = _GraphBuilder(padding)
    x, cin = INPUT, in_channels
    for i, w in enumerate(widths):
        if i > 0 and w == cin:
            y = g.conv(f"layer{i}.conv", x, cin, w, 3)
            y = g.add(f"layer{i}.bn", LayerKind.BATCH_NORM, [y], w, w)
            y = g.add(f"layer{i}.add", LayerKind.ADD, [y, x], w, w)
            x = g.add(f"layer{i}.relu", LayerKind.RELU, [y], w, w)
        else:
            x = g.conv_bn_relu(f"layer{i}", x, cin, w)
        cin = w
    x = g.conv("head", x, cin, out_channels, 1)
    out = g.add("head.sigmoid", LayerKind.SIGMOID, [x], out_channels, out_channels)
    return _finish("residual_cnn", in_channels, out_channels, 0, g, out)


def build_dense_cnn(
    widths: Sequence[int] = FLATCNN_WIDTHS,
    in_channels: int = 1,
    out_channels: int = 1,
    padding: PaddingKind = PaddingKind.ZERO,
) -> NetworkSpec:
    """FlatCNN where each unit sees the concatenation of every earlier unit's output."""
    g = _GraphBuilder(padding)
    features: List[Tuple[str, int]] = []
    x, cin = INPUT, in_channels
    for i, w in enumerate(widths):
        if len(features) > 1:
            cin = sum(c for _, c in features)
            x = g.add(f"layer{i}.cat", LayerKind.CONCAT, [n for n, _ in features], cin, cin)
        x = g.conv_bn_relu(f"layer{i}", x, cin, w)
        features.append((x, w))
        cin = w
    x = g.conv("head", x, cin, out_channels, 1)
    out = g.add("head.sigmoid", LayerKind.SIGMOID, [x], out_channels, out_channels)
    return _finish("dense_cnn", in_channels, out_channels, 0, g, out)


def _finish(
    name: str, cin: int, cout: int, levels: int, g: _GraphBuilder, output: str
) -> NetworkSpec:
    spec = NetworkSpec(
        name=name,
        in_channels=cin,
        out_channels=cout,
        levels=levels,
        layers=g.layers,
        output=output,
    )
    validate_spec(spec)
    return spec


def validate_spec(spec: NetworkSpec) -> Dict[str, int]:
    """Check channel flow through the graph; returns output channels per node."""
    channels: Dict[str, int] = {INPUT: spec.in_channels}
    for layer in spec.layers:
        if layer.name in channels:
            raise ShapeMismatch(f"duplicate layer name '{layer.name}'")
        missing = [src for src in layer.inputs if src not in channels]
        if missing:
            raise ShapeMismatch(f"layer '{layer.name}' reads undefined inputs {missing}")
        incoming = [channels[src] for src in layer.inputs]
        if layer.kind == LayerKind.CONCAT:
            got = sum(incoming)
        elif layer.kind == LayerKind.ADD:
            if len(set(incoming)) != 1:
                raise ShapeMismatch(f"add layer '{layer.name}' mixes channel counts {incoming}")
            got = incoming[0]
        else:
            if len(incoming) != 1:
                raise ShapeMismatch(f"layer '{layer.name}' takes exactly one input")
            got = incoming[0]
        if got != layer.in_channels:
            raise ShapeMismatch(
                f"layer '{layer.name}' expects {layer.in_channels} channels, receives {got}"
            )
        if layer.kind not in (LayerKind.CONV,) and layer.out_channels != layer.in_channels:
            raise ShapeMismatch(f"layer '{layer.name}' cannot change the channel count")
        channels[layer.name] = layer.out_channels
    if spec.output not in channels:
        raise ShapeMismatch(f"output '{spec.output}' is not a layer")
    if channels[spec.output] != spec.out_channels:
        raise ShapeMismatch(
            f"output has {channels[spec.output]} channels, spec declares {spec.out_channels}"
        )
    return channels


def infer_shapes(spec: NetworkSpec, height: int, width: int) -> Dict[str, Tuple[int, int, int]]:
    """(C, H, W) of every node for an input of the given size."""
    factor = 2**spec.levels
    if height % factor or width % factor:
        raise InputTooSmall(
            f"{spec.name} needs H and W divisible by {factor}, got {height}x{width}"
        )
    channels = validate_spec(spec)
    shapes: Dict[str, Tuple[int, int, int]] = {INPUT: (spec.in_channels, height, width)}
    for layer in spec.layers:
        _, h, w = shapes[layer.inputs[0]]
        if layer.kind == LayerKind.MAXPOOL:
            if h < 2 or w < 2 or h % 2 or w % 2:
                raise InputTooSmall(f"cannot pool a {h}x{w} map at '{layer.name}'")
            h, w = h // 2, w // 2
        elif layer.kind == LayerKind.UPSAMPLE:
            h, w = 2 * h, 2 * w
        elif layer.kind in (LayerKind.CONCAT, LayerKind.ADD):
            sizes = {shapes[src][1:] for src in layer.inputs}
            if len(sizes) != 1:
                raise ShapeMismatch(f"'{layer.name}' joins maps of sizes {sorted(sizes)}")
        shapes[layer.name] = (channels[layer.name], h, w)
    return shapes


def count_params(spec: NetworkSpec) -> int:
    """Trainable scalars: k^2 * C_in * C_out + C_out per conv, 2 * C per batch norm."""
    total = 0
    for layer in spec.layers:
        if layer.kind == LayerKind.CONV:
            total += layer.kernel**2 * layer.in_channels * layer.out_channels + layer.out_channels
        elif layer.kind == LayerKind.BATCH_NORM:
            total += 2 * layer.out_channels
    return total
