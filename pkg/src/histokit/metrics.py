"""Challenge scoring: plain Dice overlap and the pairwise Ensemble Dice.

Ensemble Dice accumulates, over every ground-truth/prediction instance pair
with nonempty overlap, the overlap area and the sum of both instance areas,
then returns 2 * intersection / total. Instances that intersect several
counterparts contribute their full area once per intersecting pair, and
instances with no overlap at all contribute nothing; both behaviors are kept
exactly as published rather than "fixed". When no pair intersects the score
is 1.0 for two empty masks and 0.0 otherwise.
"""

from dataclasses import dataclass

import numpy as np

from .imaging import HistokitError, as_labeled_mask, binarize, check_same_shape


@dataclass(frozen=True)
class TileScore:
    dice1: float
    dice2: float

    @property
    def average(self):
        return (self.dice1 + self.dice2) / 2.0


def dice1(gt, pred):
    """Classical Dice on the binarized masks; two empty masks score 1.0."""
    gt = as_labeled_mask(gt)
    pred = as_labeled_mask(pred)
    check_same_shape(gt, pred, "gt/pred masks")
    a = binarize(gt)
    b = binarize(pred)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / denom


def _pair_overlaps(gt, pred):
    """Overlap table: (gt ids, pred ids, overlap pixel counts) per pair."""
    both = (gt > 0) & (pred > 0)
    if not both.any():
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
    g = gt[both].astype(np.int64)
    p = pred[both].astype(np.int64)
    span = np.int64(pred.max()) + 1
    codes, counts = np.unique(g * span + p, return_counts=True)
    return codes // span, codes % span, counts


def dice2(gt, pred):
    """Ensemble Dice over the instance pair overlaps (see module docstring)."""
    gt = as_labeled_mask(gt)
    pred = as_labeled_mask(pred)
    check_same_shape(gt, pred, "gt/pred masks")
    q_ids, p_ids, counts = _pair_overlaps(gt, pred)
    if counts.size == 0:
        return 1.0 if gt.max() == 0 and pred.max() == 0 else 0.0
    gt_areas = np.bincount(gt.ravel())
    pred_areas = np.bincount(pred.ravel())
    intersection = int(counts.sum())
    total_markup = int(gt_areas[q_ids].sum() + pred_areas[p_ids].sum())
    return 2.0 * intersection / total_markup


def score_tile(gt, pred):
    return TileScore(dice1(gt, pred), dice2(gt, pred))


def score_dataset(pairs):
    """Unweighted mean of tile averages over (gt, pred) mask pairs."""
    scores = [score_tile(gt, pred) for gt, pred in pairs]
    if not scores:
        raise HistokitError("score_dataset needs at least one mask pair")
    return float(np.mean([s.average for s in scores]))
