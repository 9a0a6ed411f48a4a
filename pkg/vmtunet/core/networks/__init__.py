from vmtunet.core.networks.builders import (
    FLATCNN_WIDTHS,
    build_dense_cnn,
    build_flatcnn,
    build_residual_cnn,
    build_unet,
    count_params,
    infer_shapes,
    validate_spec,
)
from vmtunet.core.networks.model import VMTUNetModel, build_force_spec, vmtunet_forward
from vmtunet.core.networks.runtime import Network

__all__ = [
    "FLATCNN_WIDTHS",
    "Network",
    "VMTUNetModel",
    "build_dense_cnn",
    "build_flatcnn",
    "build_force_spec",
    "build_residual_cnn",
    "build_unet",
    "count_params",
    "infer_shapes",
    "validate_spec",
    "vmtunet_forward",
]
