import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import trange

from vmtunet.core.autodiff.losses import get_loss
from vmtunet.core.autodiff.optim import Adam
from vmtunet.core.autodiff.tape import Tape, Tensor
from vmtunet.core.errors import Diverged
from vmtunet.core.field.field import ImageTensor
from vmtunet.core.models.models import EvalRecord, LossKind, TrainConfig
from vmtunet.core.networks.model import VMTUNetModel
from vmtunet.core.training.metrics import mask_summary, threshold
from vmtunet.utils.logger import logger

Sample = Tuple[ImageTensor, np.ndarray]

HISTORY_COLUMNS = ["epoch", "loss", "overlap_accuracy", "pixel_accuracy", "dice"]


@dataclass
class TrainHistory:
    epoch_losses: List[float] = field(default_factory=list)
    records: List[EvalRecord] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.summary_row() for r in self.records], columns=HISTORY_COLUMNS)

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False)


def to_input(image: ImageTensor) -> Tensor:
    return Tensor(image.to_batch())


def to_target(mask: np.ndarray) -> Tensor:
    return Tensor(np.asarray(mask, dtype=np.float64)[None, None])


def evaluate(
    model: VMTUNetModel,
    samples: Sequence[Sample],
    epoch: int = 0,
    loss_kind: LossKind = LossKind.BCE,
) -> EvalRecord:
    """Eval-mode forward over ``samples``; the model's previous mode is restored."""
    was_training = model.f_net.training
    model.eval()
    loss_fn = get_loss(loss_kind)
    losses, preds, gts = [], [], []
    try:
        for image, mask in samples:
            pred = model(to_input(image))
            losses.append(loss_fn(pred, to_target(mask)).item())
            preds.append(threshold(pred)[0, 0])
            gts.append(np.asarray(mask))
    finally:
        if was_training:
            model.train()
    summary = mask_summary(preds, gts)
    if summary["empty_pairs"]:
        logger.warning(f"images {summary['empty_pairs']} have empty prediction and ground truth")
    return EvalRecord(epoch=epoch, loss=float(np.mean(losses)), **summary)


def train(
    model: VMTUNetModel,
    samples: Sequence[Sample],
    config: Optional[TrainConfig] = None,
    eval_samples: Optional[Sequence[Sample]] = None,
    disable_tqdm: bool = True,
) -> Tuple[VMTUNetModel, TrainHistory]:
    """
    Minimize the mean per-sample loss with Adam.

    Each epoch visits the samples in a seeded permutation; gradients of a
    mini-batch are summed in visiting order (each sample weighted 1 / batch size)
    before one optimizer step. An EvalRecord is taken after epoch 1, every
    ``eval_every`` epochs and after the final epoch.
    """
    config = config or model.config
    if not samples:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    loss_fn = get_loss(config.loss)
    optimizer = Adam(model.parameters(), lr=config.lr)
    history = TrainHistory()
    eval_set = eval_samples if eval_samples is not None else samples
    inputs = [(to_input(img), to_target(mask)) for img, mask in samples]

    model.train()
    for epoch in trange(1, config.epochs + 1, disable=disable_tqdm, desc="Training", leave=False):
        order = rng.permutation(len(inputs))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            optimizer.zero_grad()
            for idx in batch:
                x, target = inputs[idx]
                with Tape() as tape:
                    loss = loss_fn(model(x), target)
                value = loss.item()
                if not math.isfinite(value):
                    raise Diverged(step=epoch, value=value, where=f"training on sample {idx}")
                tape.backward(loss, np.array(1.0 / len(batch)))
                total += value
            optimizer.step()
        epoch_loss = total / len(inputs)
        history.epoch_losses.append(epoch_loss)

        if epoch == 1 or epoch % config.eval_every == 0 or epoch == config.epochs:
            record = evaluate(model, eval_set, epoch, config.loss)
            record = record.model_copy(update={"loss": epoch_loss})
            history.records.append(record)
            logger.info(
                f"epoch {epoch}: loss={epoch_loss:.6f} dice={record.mean_dice:.4f} "
                f"pixel_accuracy={record.mean_pixel_accuracy:.2f}",
                extra={"epoch": epoch, "loss": epoch_loss, "dice": record.mean_dice},
            )
    return model, history
