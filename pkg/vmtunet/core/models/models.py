import hashlib
from enum import Enum
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator


# Global
class BoundaryKind(str, Enum):
    NEUMANN = "neumann"
    PERIODIC = "periodic"


class Scheme(str, Enum):
    TFPM = "tfpm"
    FDM = "fdm"


class InitKind(str, Enum):
    FROM_IMAGE = "from_image"
    CIRCLE = "circle"
    CHECKERBOARD = "checkerboard"


class PaddingKind(str, Enum):
    ZERO = "zero"
    # reflect-with-edge-repeat; at width 1 the ghost cell equals the edge cell
    REFLECT = "reflect"
    WRAP = "wrap"


class ShapeFamily(str, Enum):
    DISKS = "disks"
    RECTANGLES = "rectangles"
    RINGS = "rings"
    BLOBS = "blobs"
    VESSELS = "vessels"


class LossKind(str, Enum):
    BCE = "bce"
    L2 = "l2"
    HINGE = "hinge"


class FNetKind(str, Enum):
    UNET = "unet"
    FLATCNN = "flatcnn"
    RESIDUAL = "residual"
    DENSE = "dense"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class CHParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    eps1: float = Field(default=1.0, gt=0, description="Interface coefficient of the gradient term")
    eps2: float = Field(default=1.0, gt=0, description="Scale of the double-well term")
    eps3: float = Field(default=0.1, gt=0, description="Width of the arctan region weighting")
    lambda1: float = Field(default=1.0, ge=0, description="Fidelity weight of the u >= 1/2 phase")
    lambda2: float = Field(default=1.0, ge=0, description="Fidelity weight of the u < 1/2 phase")
    tau: float = Field(default=0.01, gt=0, description="Time step")
    h: float = Field(default=1.0, gt=0, description="Grid spacing in pixel units")
    M: int = Field(default=20, ge=1, description="Number of steps, or unrolled blocks")


class CVParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float = Field(default=0.1, ge=0, description="Length weight")
    lambda1: float = Field(default=1.0, gt=0, description="Inside fidelity weight")
    lambda2: float = Field(default=1.0, gt=0, description="Outside fidelity weight")
    eps: float = Field(default=1.0, gt=0, description="Regularization width of H_eps and delta_eps")
    dt: float = Field(default=0.1, gt=0, description="Explicit step size")
    iters: int = Field(default=500, ge=1)
    reinit_every: int = Field(default=0, ge=0, description="0 disables reinitialization")
    snapshot_every: int = Field(default=10, ge=1, description="Trace interval in iterations")


class Circle(BaseModel):
    """Disk initialization in pixel coordinates; cx is the column, cy the row."""

    model_config = ConfigDict(frozen=True)

    cx: float
    cy: float
    r: float = Field(gt=0)


class ForceState(BaseModel):
    model_config = ConfigDict(frozen=True)

    c1: float
    c2: float


class StabilityStep(BaseModel):
    step: int
    norm_u: float
    norm_lap_u: float
    lhs: float
    rhs: float
    holds: bool


class StabilityReport(BaseModel):
    steps: List[StabilityStep]
    A: float
    B: float
    C: float
    D: float
    delta: float
    gamma: float
    L: float
    M_F: float
    C_delta: float

    @property
    def holds(self) -> bool:
        return all(s.holds for s in self.steps)

    @property
    def violations(self) -> List[int]:
        return [s.step for s in self.steps if not s.holds]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [s.model_dump() for s in self.steps],
            columns=["step", "norm_u", "norm_lap_u", "lhs", "rhs", "holds"],
        )

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False)


class EvalRecord(BaseModel):
    epoch: int
    loss: float
    overlap_accuracy: List[float]
    pixel_accuracy: List[float]
    dice: List[float]
    empty_pairs: List[int] = Field(
        default_factory=list, description="Indices scored dice 1 because both masks were empty"
    )

    @staticmethod
    def _mean(values: List[float]) -> float:
        return float(sum(values) / len(values)) if values else float("nan")

    @staticmethod
    def _std(values: List[float]) -> float:
        if len(values) < 2:
            return 0.0
        mean = sum(values) / len(values)
        return float((sum((v - mean) ** 2 for v in values) / (len(values) - 1)) ** 0.5)

    @property
    def mean_overlap_accuracy(self) -> float:
        return self._mean(self.overlap_accuracy)

    @property
    def mean_pixel_accuracy(self) -> float:
        return self._mean(self.pixel_accuracy)

    @property
    def mean_dice(self) -> float:
        return self._mean(self.dice)

    @property
    def std_overlap_accuracy(self) -> float:
        return self._std(self.overlap_accuracy)

    @property
    def std_pixel_accuracy(self) -> float:
        return self._std(self.pixel_accuracy)

    @property
    def std_dice(self) -> float:
        return self._std(self.dice)

    def summary_row(self) -> Dict[str, float]:
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "overlap_accuracy": self.mean_overlap_accuracy,
            "pixel_accuracy": self.mean_pixel_accuracy,
            "dice": self.mean_dice,
        }


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    count: int = Field(default=200, ge=1, description="Number of training samples")
    test_count: int = Field(default=50, ge=0, description="Number of test samples")
    size: int = Field(default=64, ge=8, description="Image height and width")
    family: ShapeFamily = ShapeFamily.DISKS
    fg_mean: float = Field(default=0.85, ge=0, le=1)
    bg_mean: float = Field(default=0.15, ge=0, le=1)
    noise_sigma: float = Field(default=0.05, ge=0)
    seed: int = 7

    def spec_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()[:16]


class ManifestEntry(BaseModel):
    image: str
    mask: str
    split: Split = Split.TRAIN


class DatasetManifest(BaseModel):
    entries: List[ManifestEntry]
    root: str = Field(default=".", description="Directory relative entry paths resolve against")
    spec_hash: Optional[str] = None

    def split(self, which: Split) -> List[ManifestEntry]:
        return [e for e in self.entries if e.split == which]


class LayerKind(str, Enum):
    CONV = "conv"
    BATCH_NORM = "batch_norm"
    RELU = "relu"
    MAXPOOL = "maxpool"
    UPSAMPLE = "upsample"
    CONCAT = "concat"
    ADD = "add"
    SIGMOID = "sigmoid"


class LayerSpec(BaseModel):
    name: str
    kind: LayerKind
    inputs: List[str]
    in_channels: int = Field(ge=1)
    out_channels: int = Field(ge=1)
    kernel: int = Field(default=1, ge=1)
    padding: PaddingKind = PaddingKind.ZERO

    @field_validator("kernel")
    @classmethod
    def kernel_is_odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("kernel size must be odd")
        return value


class NetworkSpec(BaseModel):
    name: str
    in_channels: int = Field(ge=1)
    out_channels: int = Field(ge=1)
    levels: int = Field(default=0, ge=0, description="Number of factor-2 downsamplings")
    layers: List[LayerSpec]
    output: str

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, payload: str) -> "NetworkSpec":
        return cls.model_validate_json(payload)


class TrainConfig(BaseModel):
    channels: List[int] = Field(default_factory=lambda: [8, 8, 16])
    f_net: FNetKind = FNetKind.UNET
    flat_widths: Optional[List[int]] = Field(
        default=None, description="Widths for the flat ablation networks; None means the full stack"
    )
    in_channels: int = Field(default=1, ge=1)
    blocks: int = Field(default=10, ge=1)
    # 0.5 diverges within the first forward pass at h = 1; 0.05 keeps the 10 blocks bounded
    tau: float = Field(default=0.05, gt=0)
    eps1: float = Field(default=1.0, gt=0)
    eps2: float = Field(default=1.0, gt=0)
    h: float = Field(default=1.0, gt=0)
    scheme: Scheme = Scheme.TFPM
    bc: BoundaryKind = BoundaryKind.PERIODIC
    freeze_tfpm_center: bool = False
    epochs: int = Field(default=600, ge=1)
    lr: float = Field(default=1e-3, ge=0)
    batch_size: int = Field(default=4, ge=1)
    loss: LossKind = LossKind.BCE
    seed: int = 7
    eval_every: int = Field(default=10, ge=1)

    @field_validator("channels")
    @classmethod
    def channels_positive(cls, value: List[int]) -> List[int]:
        if not value or any(c < 1 for c in value):
            raise ValueError("channels vector must be a nonempty list of positive integers")
        return value

    def ch_params(self) -> CHParams:
        return CHParams(eps1=self.eps1, eps2=self.eps2, tau=self.tau, h=self.h, M=self.blocks)


class RunStamp(BaseModel):
    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    version: str


# CLI commands
class GenOptions(BaseModel):
    out: str
    spec: Optional[str] = Field(default=None, description="JSON file holding a SyntheticSpec")
    count: Optional[int] = None
    test_count: Optional[int] = None
    size: Optional[int] = None
    family: Optional[ShapeFamily] = None
    noise_sigma: Optional[float] = None
    seed: Optional[int] = None


class SegmentCVOptions(BaseModel):
    image: str
    out: str
    mu: float = 0.1
    lambda1: float = 1.0
    lambda2: float = 1.0
    eps: float = 1.0
    dt: float = 0.1
    iters: int = 500
    reinit_every: int = 0
    init: InitKind = InitKind.CHECKERBOARD
    truth: Optional[str] = Field(default=None, description="Ground-truth mask for a dice report")

    def cv_params(self) -> CVParams:
        return CVParams(
            mu=self.mu,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            eps=self.eps,
            dt=self.dt,
            iters=self.iters,
            reinit_every=self.reinit_every,
        )


class SegmentCHOptions(BaseModel):
    image: str
    out: str
    scheme: Scheme = Scheme.TFPM
    eps1: float = 1.0
    eps2: float = 1.0
    eps3: float = 0.1
    lambda1: float = 1.0
    lambda2: float = 1.0
    tau: float = 0.01
    h: float = 1.0
    inner: int = 20
    outer: int = 30
    bc: BoundaryKind = BoundaryKind.NEUMANN
    init: InitKind = InitKind.FROM_IMAGE
    truth: Optional[str] = None

    def ch_params(self) -> CHParams:
        return CHParams(
            eps1=self.eps1,
            eps2=self.eps2,
            eps3=self.eps3,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            tau=self.tau,
            h=self.h,
            M=self.inner,
        )


class TrainOptions(TrainConfig):
    manifest: str
    ckpt: str = "model.ckpt"


class EvalOptions(BaseModel):
    manifest: str
    ckpt: str
    out: str
    split: Split = Split.TEST


class AblateOptions(TrainConfig):
    what: str
    manifest: str
    out: str = "ablation.csv"


class SweepOptions(TrainConfig):
    axis: str
    values: List[float]
    manifest: str
    out: str = "sweep.csv"


class PanelOptions(BaseModel):
    images: List[str]
    masks: List[str]
    out: str
    contour: bool = False
    scale: int = Field(default=1, ge=1)
