from typing import List, Sequence, Tuple, Union

import numpy as np

from vmtunet.core.autodiff.tape import Tensor
from vmtunet.core.errors import ShapeMismatch

MaskLike = Union[np.ndarray, Tensor]


def _array(x: MaskLike) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _as_list(masks) -> List[np.ndarray]:
    if isinstance(masks, (np.ndarray, Tensor)):
        arr = _array(masks)
        return [arr] if arr.ndim == 2 else [a.reshape(a.shape[-2:]) for a in arr]
    return [_array(m).reshape(_array(m).shape[-2:]) for m in masks]


def _pairs(preds, gts) -> List[Tuple[np.ndarray, np.ndarray]]:
    p, g = _as_list(preds), _as_list(gts)
    if len(p) != len(g):
        raise ShapeMismatch(f"{len(p)} predictions for {len(g)} ground truths")
    for a, b in zip(p, g):
        if a.shape != b.shape:
            raise ShapeMismatch(f"prediction {a.shape} vs ground truth {b.shape}")
    return [(a > 0.5, b > 0.5) for a, b in zip(p, g)]


def threshold(pred: MaskLike, t: float = 0.5) -> np.ndarray:
    """1 where pred >= t (inclusive), else 0."""
    return (_array(pred) >= t).astype(np.float64)


def overlap_accuracy_scores(preds, gts) -> List[float]:
    """Per image 100 * |pred AND gt| / (N1 * N2)."""
    return [100.0 * float(np.sum(p & g)) / p.size for p, g in _pairs(preds, gts)]


def overlap_accuracy(preds, gts) -> float:
    return float(np.mean(overlap_accuracy_scores(preds, gts)))


def dice_scores(preds, gts) -> Tuple[List[float], List[int]]:
    """Per-image dice and the indices where both masks were empty (scored 1)."""
    scores, empty = [], []
    for i, (p, g) in enumerate(_pairs(preds, gts)):
        denominator = int(p.sum() + g.sum())
        if denominator == 0:
            scores.append(1.0)
            empty.append(i)
        else:
            scores.append(2.0 * float(np.sum(p & g)) / denominator)
    return scores, empty


def dice(preds, gts) -> float:
    return float(np.mean(dice_scores(preds, gts)[0]))


def pixel_accuracy_scores(preds, gts) -> List[float]:
    return [100.0 * float(np.mean(p == g)) for p, g in _pairs(preds, gts)]


def pixel_accuracy(preds, gts) -> float:
    return float(np.mean(pixel_accuracy_scores(preds, gts)))


def mask_summary(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]) -> dict:
    scores, empty = dice_scores(preds, gts)
    return {
        "overlap_accuracy": overlap_accuracy_scores(preds, gts),
        "pixel_accuracy": pixel_accuracy_scores(preds, gts),
        "dice": scores,
        "empty_pairs": empty,
    }
