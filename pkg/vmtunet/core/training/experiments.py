"""Hyperparameter sweeps and component ablations built on ``train``."""

from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from vmtunet.core.errors import Diverged
from vmtunet.core.models.models import FNetKind, Scheme, TrainConfig
from vmtunet.core.networks.builders import count_params
from vmtunet.core.networks.model import VMTUNetModel
from vmtunet.core.training.trainer import Sample, evaluate, train
from vmtunet.utils.logger import logger

SWEEP_AXES = {"M": "blocks", "tau": "tau", "eps1": "eps1", "eps2": "eps2"}
ABLATIONS = {
    "f-approximator": ("f_net", [FNetKind.UNET, FNetKind.FLATCNN, FNetKind.RESIDUAL, FNetKind.DENSE]),
    "laplacian": ("scheme", [Scheme.TFPM, Scheme.FDM]),
}

SWEEP_COLUMNS = ["value", "epoch", "loss", "overlap_accuracy", "pixel_accuracy", "dice", "diverged"]
ABLATE_COLUMNS = [
    "variant",
    "params",
    "loss",
    "overlap_accuracy",
    "pixel_accuracy",
    "dice",
    "dice_std",
    "diverged",
]


def _diverged_row(**extra: Any) -> Dict[str, Any]:
    nan = float("nan")
    row = {"loss": nan, "overlap_accuracy": nan, "pixel_accuracy": nan, "dice": nan}
    row.update(extra, diverged=True)
    return row


def sweep(
    axis: str,
    values: Sequence[float],
    base_config: TrainConfig,
    samples: Sequence[Sample],
    eval_samples: Optional[Sequence[Sample]] = None,
) -> pd.DataFrame:
    """
    Train one model per value of ``axis`` with everything else held fixed.

    A value whose training diverges is recorded with ``diverged = True`` and NaN
    metrics; the remaining values still run.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis '{axis}', expected one of {sorted(SWEEP_AXES)}")
    if not values:
        raise ValueError("sweep needs at least one value")
    field = SWEEP_AXES[axis]
    rows: List[Dict[str, Any]] = []
    for value in values:
        cast = int(value) if field == "blocks" else float(value)
        config = TrainConfig.model_validate({**base_config.model_dump(), field: cast})
        logger.info(f"sweep {axis}={cast}")
        try:
            _, history = train(VMTUNetModel(config), samples, config, eval_samples)
        except Diverged as e:
            logger.warning(f"sweep {axis}={cast} diverged: {e}")
            rows.append(_diverged_row(value=cast, epoch=float("nan")))
            continue
        for row in history.to_frame().to_dict("records"):
            rows.append({"value": cast, **row, "diverged": False})
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def ablate(
    what: str,
    base_config: TrainConfig,
    samples: Sequence[Sample],
    eval_samples: Optional[Sequence[Sample]] = None,
) -> pd.DataFrame:
    """Swap one component (force network or block Laplacian) and compare final metrics."""
    if what not in ABLATIONS:
        raise ValueError(f"unknown ablation '{what}', expected one of {sorted(ABLATIONS)}")
    field, variants = ABLATIONS[what]
    eval_set = eval_samples if eval_samples is not None else samples
    rows: List[Dict[str, Any]] = []
    for variant in variants:
        config = TrainConfig.model_validate({**base_config.model_dump(), field: variant})
        model = VMTUNetModel(config)
        n_params = count_params(model.f_net.spec)
        logger.info(f"ablation {what}: {variant.value} ({n_params} force-network parameters)")
        try:
            train(model, samples, config, eval_samples)
        except Diverged as e:
            logger.warning(f"ablation variant {variant.value} diverged: {e}")
            rows.append(_diverged_row(variant=variant.value, params=n_params, dice_std=float("nan")))
            continue
        record = evaluate(model, eval_set, config.epochs, config.loss)
        rows.append(
            {
                "variant": variant.value,
                "params": n_params,
                "loss": record.loss,
                "overlap_accuracy": record.mean_overlap_accuracy,
                "pixel_accuracy": record.mean_pixel_accuracy,
                "dice": record.mean_dice,
                "dice_std": record.std_dice,
                "diverged": False,
            }
        )
    return pd.DataFrame(rows, columns=ABLATE_COLUMNS)
