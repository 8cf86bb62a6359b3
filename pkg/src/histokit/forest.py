"""Bagged regression forest, written out rather than imported.

Ten trees, each fit on a bootstrap resample; every split draws one third of
the selected features (without replacement) and picks the threshold that
minimizes the summed squared error of the children, requiring at least
``min_leaf`` samples per side. Leaves store the mean target; a slide's score
is the mean of the tree outputs, thresholded into LUAD (< t) or LUSC (>= t).
Targets are encoded LUAD = 0.0, LUSC = 1.0.
"""

import json
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .classify import extract_features, select_features
from .imaging import HistokitError
from .rng import generator

log = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1
LABEL_TO_TARGET = {"LUAD": 0.0, "LUSC": 1.0}


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple
    selected_features: tuple
    decision_threshold: float
    training_seed: int


def _sse(total, total_sq, n):
    return total_sq - total * total / n


def _best_split(x, y, features, min_leaf):
    """(feature, threshold, sse_after) of the best candidate split, or None.

    Features are tried in the given (already randomized) order and thresholds
    in increasing order; only strict improvements replace the incumbent, so
    the result is deterministic.
    """
    n = y.size
    best = None
    best_sse = _sse(y.sum(), (y * y).sum(), n)
    for f in features:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        csum = np.cumsum(ys)
        csum_sq = np.cumsum(ys * ys)
        total, total_sq = csum[-1], csum_sq[-1]
        for i in range(min_leaf, n - min_leaf + 1):
            if xs[i - 1] == xs[i]:
                continue  # not a boundary between distinct values
            sse = _sse(csum[i - 1], csum_sq[i - 1], i) + _sse(
                total - csum[i - 1], total_sq - csum_sq[i - 1], n - i
            )
            if sse < best_sse - 1e-12:
                mid = (xs[i - 1] + xs[i]) / 2.0
                if mid >= xs[i]:  # adjacent floats can round the midpoint up
                    mid = xs[i - 1]
                best_sse = sse
                best = (int(f), float(mid))
    if best is None:
        return None
    return best[0], best[1], best_sse


def _grow(x, y, features, min_leaf, rng, mtry):
    n = y.size
    constant = bool(np.all(y == y[0]))
    if n < 2 * min_leaf or constant:
        return {"value": float(y[0]) if constant else float(y.mean()), "n": int(n)}
    candidates = np.asarray(features)[rng.permutation(len(features))[:mtry]]
    split = _best_split(x, y, candidates, min_leaf)
    if split is None:
        return {"value": float(y.mean()), "n": int(n)}
    f, threshold, _ = split
    left = x[:, f] <= threshold
    return {
        "feature": f,
        "threshold": threshold,
        "left": _grow(x[left], y[left], features, min_leaf, rng, mtry),
        "right": _grow(x[~left], y[~left], features, min_leaf, rng, mtry),
    }


def train_random_forest(features, targets, selected, n_trees=10, mtry=None, min_leaf=5, seed=0):
    """Fit the bagged forest; decision_threshold starts at 0.5 (see
    ``choose_threshold`` / ``fit_classifier``)."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise HistokitError("features/targets shape mismatch")
    if y.size < 2 * min_leaf:
        raise HistokitError(f"need at least {2 * min_leaf} training samples")
    if mtry is None:
        mtry = math.ceil(len(selected) / 3)
    trees = []
    for t in range(n_trees):
        rng = generator(seed, t)
        boot = rng.integers(0, y.size, y.size)
        trees.append(_grow(x[boot], y[boot], list(selected), min_leaf, rng, mtry))
    return RandomForestModel(
        trees=tuple(trees),
        selected_features=tuple(int(i) for i in selected),
        decision_threshold=0.5,
        training_seed=int(seed),
    )


def _predict_tree(node, vec):
    while "value" not in node:
        node = node["left"] if vec[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


def predict_score(model, features):
    """Mean tree output; always inside the hull of the training targets."""
    vec = np.asarray(features, dtype=np.float64)
    outputs = [_predict_tree(t, vec) for t in model.trees]
    if all(o == outputs[0] for o in outputs):
        return outputs[0]  # keep a constant forest exact
    return float(np.mean(outputs))


def choose_threshold(scores, labels):
    """Training-accuracy-maximizing threshold among midpoints of the sorted
    distinct scores; ties resolve to the midpoint closest to 0.5, then the
    smaller one. Degenerate inputs fall back to 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(np.unique(y)) < 2:
        log.warning("choose_threshold: single-class labels, returning 0.5")
        return 0.5
    distinct = np.unique(scores)
    if distinct.size < 2:
        return 0.5
    midpoints = (distinct[:-1] + distinct[1:]) / 2.0
    best = 0.5
    best_acc = -1.0
    for t in midpoints:
        acc = float(((scores >= t) == (y == 1.0)).mean())
        better = acc > best_acc
        tie = acc == best_acc and (
            abs(t - 0.5) < abs(best - 0.5)
            or (abs(t - 0.5) == abs(best - 0.5) and t < best)
        )
        if better or tie:
            best_acc = acc
            best = float(t)
    return best


def classify_wsi(model, pmap):
    """LUSC when the forest score reaches the decision threshold, else LUAD."""
    vec = extract_features(pmap)
    return "LUSC" if predict_score(model, vec) >= model.decision_threshold else "LUAD"


def fit_classifier(features, labels, seed=0, k=25, n_trees=10, min_leaf=5):
    """Select features, train the forest and pick the decision threshold."""
    y = np.asarray([LABEL_TO_TARGET[l] for l in labels])
    selected = select_features(features, y.astype(int), k=k)
    model = train_random_forest(
        features, y, selected, n_trees=n_trees, min_leaf=min_leaf, seed=seed
    )
    scores = [predict_score(model, vec) for vec in np.asarray(features, dtype=np.float64)]
    return replace(model, decision_threshold=choose_threshold(scores, y))


# ---------------------------------------------------------------------------
# Model file


def save_model(model, path):
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "trees": list(model.trees),
        "selected_features": list(model.selected_features),
        "decision_threshold": model.decision_threshold,
        "training_seed": model.training_seed,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise HistokitError(f"{path}: unsupported model schema")
    return RandomForestModel(
        trees=tuple(payload["trees"]),
        selected_features=tuple(payload["selected_features"]),
        decision_threshold=float(payload["decision_threshold"]),
        training_seed=int(payload["training_seed"]),
    )
