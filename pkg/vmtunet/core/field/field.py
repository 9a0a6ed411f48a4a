"""Grid types and the stencils every solver shares.

Arrays are addressed as ``[..., row, col]``: helpers operate on the last two
axes so the same code serves a bare H x W field and an (N, C, H, W) batch.
"""

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from vmtunet.core.models.models import BoundaryKind, PaddingKind

PadKind = Union[BoundaryKind, PaddingKind]

_NUMPY_PAD_MODES = {
    BoundaryKind.NEUMANN: "symmetric",
    BoundaryKind.PERIODIC: "wrap",
    PaddingKind.REFLECT: "symmetric",
    PaddingKind.WRAP: "wrap",
    PaddingKind.ZERO: "constant",
}

# luminance weights (ITU-R BT.601)
_LUMA = np.array([0.299, 0.587, 0.114])


def as_padding(kind: PadKind) -> PaddingKind:
    if isinstance(kind, PaddingKind):
        return kind
    return PaddingKind.REFLECT if kind == BoundaryKind.NEUMANN else PaddingKind.WRAP


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray
    bc: BoundaryKind = BoundaryKind.NEUMANN

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"ScalarField needs a 2-D array, got shape {values.shape}")
        if values.shape[0] < 3 or values.shape[1] < 3:
            raise ValueError(f"ScalarField must be at least 3x3, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("ScalarField values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bc", BoundaryKind(self.bc))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @classmethod
    def constant(
        cls, value: float, height: int, width: int, bc: BoundaryKind = BoundaryKind.NEUMANN
    ) -> "ScalarField":
        return cls(np.full((height, width), float(value)), bc)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(values, self.bc)


@dataclass(frozen=True)
class ImageTensor:
    """An N1 x N2 x D image with values in [0, 1]; D is 1 or 3."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[2] not in (1, 3):
            raise ValueError(f"ImageTensor must be H x W x D with D in (1, 3), got {values.shape}")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("ImageTensor values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def luminance(self) -> np.ndarray:
        """Single-channel H x W view; color images are reduced with BT.601 weights."""
        if self.channels == 1:
            return self.values[:, :, 0]
        return self.values @ _LUMA

    def to_batch(self) -> np.ndarray:
        """(1, D, H, W) layout used by the networks."""
        return np.ascontiguousarray(self.values.transpose(2, 0, 1)[None])


@dataclass(frozen=True)
class LaplacianKernel:
    h: float = 1.0
    taps: np.ndarray = field(init=False)

    def __post_init__(self):
        taps = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]) / self.h**2
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)


def _spatial_pad_width(ndim: int, width: int):
    return [(0, 0)] * (ndim - 2) + [(width, width), (width, width)]


def pad_array(values: np.ndarray, width: int, kind: PadKind) -> np.ndarray:
    mode = _NUMPY_PAD_MODES[kind]
    return np.pad(values, _spatial_pad_width(values.ndim, width), mode=mode)


def unpad_array(values: np.ndarray, width: int) -> np.ndarray:
    return values[..., width:-width, width:-width]


def pad_adjoint(grad_padded: np.ndarray, width: int, kind: PadKind) -> np.ndarray:
    """Transpose of ``pad_array``: every ghost cell sends its gradient back to its source."""
    if _NUMPY_PAD_MODES[kind] == "constant":
        return np.ascontiguousarray(unpad_array(grad_padded, width))
    mode = _NUMPY_PAD_MODES[kind]
    out = grad_padded
    for axis in (-2, -1):
        n = out.shape[axis] - 2 * width
        source = np.pad(np.arange(n), width, mode=mode)
        moved = np.moveaxis(out, axis, 0)
        acc = np.zeros((n,) + moved.shape[1:])
        np.add.at(acc, source, moved)
        out = np.moveaxis(acc, 0, axis)
    return out


def pad(field: ScalarField, width: int) -> ScalarField:
    if width < 1:
        raise ValueError("pad width must be >= 1")
    return ScalarField(pad_array(field.values, width, field.bc), field.bc)


def neighbor_sum(values: np.ndarray, kind: PadKind) -> np.ndarray:
    """u[i+1,j] + u[i-1,j] + u[i,j+1] + u[i,j-1] with ghost cells per ``kind``."""
    p = pad_array(values, 1, kind)
    return p[..., 2:, 1:-1] + p[..., :-2, 1:-1] + p[..., 1:-1, 2:] + p[..., 1:-1, :-2]


def neighbor_sum_adjoint(grad: np.ndarray, kind: PadKind) -> np.ndarray:
    shape = grad.shape[:-2] + (grad.shape[-2] + 2, grad.shape[-1] + 2)
    gp = np.zeros(shape)
    gp[..., 2:, 1:-1] += grad
    gp[..., :-2, 1:-1] += grad
    gp[..., 1:-1, 2:] += grad
    gp[..., 1:-1, :-2] += grad
    return pad_adjoint(gp, 1, kind)


def fdm_laplacian_array(values: np.ndarray, h: float, kind: PadKind) -> np.ndarray:
    return (neighbor_sum(values, kind) - 4.0 * values) / h**2


def laplacian_fdm(field: ScalarField, h: float) -> ScalarField:
    if h <= 0:
        raise ValueError("grid spacing h must be positive")
    return field.with_values(fdm_laplacian_array(field.values, h, field.bc))


def double_well(u):
    return u**2 * (u - 1.0) ** 2


def double_well_prime(u):
    return 4.0 * u**3 - 6.0 * u**2 + 2.0 * u


def double_well_second(u):
    return 12.0 * u**2 - 12.0 * u + 2.0


def forward_gradient(values: np.ndarray, h: float, kind: PadKind) -> Tuple[np.ndarray, np.ndarray]:
    """Forward differences (d/drow, d/dcol); Neumann edges get a zero difference."""
    p = pad_array(values, 1, kind)
    d_row = (p[..., 2:, 1:-1] - values) / h
    d_col = (p[..., 1:-1, 2:] - values) / h
    return d_row, d_col


def gl_energy(u: ScalarField, eps1: float, eps2: float, h: float) -> float:
    if eps1 <= 0 or eps2 <= 0:
        raise ValueError("eps1 and eps2 must be positive")
    d_row, d_col = forward_gradient(u.values, h, u.bc)
    density = 0.5 * eps1 * (d_row**2 + d_col**2) + double_well(u.values) / eps2
    return float(density.sum() * h**2)


def discrete_norm_sq(values: np.ndarray, h: float) -> float:
    """Discrete L2 norm squared, h^2 * sum(u^2)."""
    return float(h**2 * np.sum(values * values))
