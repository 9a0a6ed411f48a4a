from vmtunet.core.field.field import (
    ImageTensor,
    LaplacianKernel,
    ScalarField,
    double_well,
    double_well_prime,
    double_well_second,
    gl_energy,
    laplacian_fdm,
    pad,
)

__all__ = [
    "ImageTensor",
    "LaplacianKernel",
    "ScalarField",
    "double_well",
    "double_well_prime",
    "double_well_second",
    "gl_energy",
    "laplacian_fdm",
    "pad",
]
