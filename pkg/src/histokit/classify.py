"""Slide-level LUAD/LUSC calls from 3-class probability maps.

A probability map is a patch grid of (nd, luad, lusc) softmax triples. Max
voting labels the slide by positive-patch count alone; the feature extractor
computes the 50-feature schema below for the regression forest:

  index 0..7    per channel (luad, lusc): mean, median, variance,
                positive-patch fraction
  index 8..9    count ratio n_luad/(n_luad+n_lusc+eps),
                mean ratio mean_luad/(mean_luad+mean_lusc+eps)
  index 10..39  per channel, per threshold in (0.5, 0.7, 0.9): areas of the
                five largest connected components (grid cells, 4-connected),
                normalized by the grid size
  index 40..45  per channel, per threshold: total suprathreshold area,
                normalized
  index 46..49  per channel, per threshold in (0.5, 0.9): component count
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .imaging import HistokitError, connected_components

CLASSES = ("ND", "LUAD", "LUSC")
COMPONENT_THRESHOLDS = (0.5, 0.7, 0.9)
COUNT_THRESHOLDS = (0.5, 0.9)
EPS = 1e-9
N_FEATURES = 50


def _feature_names():
    names = []
    for ch in ("luad", "lusc"):
        names += [f"{ch}_mean", f"{ch}_median", f"{ch}_variance", f"{ch}_positive_fraction"]
    names += ["count_ratio_luad", "mean_ratio_luad"]
    for ch in ("luad", "lusc"):
        for t in COMPONENT_THRESHOLDS:
            names += [f"{ch}_top{i}_area_t{t}" for i in range(1, 6)]
    for ch in ("luad", "lusc"):
        names += [f"{ch}_total_area_t{t}" for t in COMPONENT_THRESHOLDS]
    for ch in ("luad", "lusc"):
        names += [f"{ch}_component_count_t{t}" for t in COUNT_THRESHOLDS]
    return tuple(names)


FEATURE_NAMES = _feature_names()
assert len(FEATURE_NAMES) == N_FEATURES


@dataclass(frozen=True)
class ProbabilityMap:
    rows: int
    cols: int
    stride: int
    patch_size: int
    values: np.ndarray  # float32 (rows, cols, 3), channels (nd, luad, lusc)
    slide_id: str

    def __post_init__(self):
        v = self.values
        if v.shape != (self.rows, self.cols, 3):
            raise HistokitError(f"probability map shape {v.shape} does not match header")
        if v.min() < 0:
            raise HistokitError("probabilities must be non-negative")
        if np.abs(v.sum(axis=2) - 1.0).max() > 1e-4:
            raise HistokitError("probability triples must sum to 1 within 1e-4")


def positive_patch_counts(pmap):
    """Patches won by each class; argmax with fixed ND > LUAD > LUSC priority
    on ties. Counts sum to rows*cols."""
    winners = np.argmax(pmap.values, axis=2)
    counts = np.bincount(winners.ravel(), minlength=3)
    return int(counts[0]), int(counts[1]), int(counts[2])


def max_vote(pmap):
    """Class with the most positive patches; count ties fall back to the
    larger grid-mean probability, then LUAD."""
    _, n_luad, n_lusc = positive_patch_counts(pmap)
    if n_luad != n_lusc:
        return "LUAD" if n_luad > n_lusc else "LUSC"
    mean_luad = float(pmap.values[:, :, 1].mean())
    mean_lusc = float(pmap.values[:, :, 2].mean())
    if mean_luad != mean_lusc:
        return "LUAD" if mean_luad > mean_lusc else "LUSC"
    return "LUAD"


def _top_component_areas(mask, k=5):
    labels = connected_components(mask, connectivity=4)
    n = int(labels.max())
    if n == 0:
        return [0.0] * k, 0
    areas = np.sort(np.bincount(labels.ravel())[1:])[::-1].astype(np.float64)
    top = list(areas[:k]) + [0.0] * max(0, k - areas.size)
    return top, n


def extract_features(pmap):
    """The 50-feature vector for one probability map (schema in the module
    docstring); every value is finite."""
    grid = float(pmap.rows * pmap.cols)
    luad = pmap.values[:, :, 1].astype(np.float64)
    lusc = pmap.values[:, :, 2].astype(np.float64)
    _, n_luad, n_lusc = positive_patch_counts(pmap)

    feats = []
    for ch, n_pos in ((luad, n_luad), (lusc, n_lusc)):
        feats += [ch.mean(), float(np.median(ch)), ch.var(), n_pos / grid]
    feats.append(n_luad / (n_luad + n_lusc + EPS))
    feats.append(luad.mean() / (luad.mean() + lusc.mean() + EPS))
    counts = {}
    for name, ch in (("luad", luad), ("lusc", lusc)):
        for t in COMPONENT_THRESHOLDS:
            top, n = _top_component_areas(ch > t)
            feats += [a / grid for a in top]
            counts[name, t] = n
    for _, ch in (("luad", luad), ("lusc", lusc)):
        for t in COMPONENT_THRESHOLDS:
            feats.append(float((ch > t).sum()) / grid)
    for name in ("luad", "lusc"):
        for t in COUNT_THRESHOLDS:
            feats.append(float(counts[name, t]))
    out = np.asarray(feats, dtype=np.float64)
    if out.shape != (N_FEATURES,) or not np.all(np.isfinite(out)):
        raise HistokitError("feature extraction produced an invalid vector")
    return out


def select_features(features, labels, k=25):
    """Indices of the k features with the highest Fisher ratio
    (mu0 - mu1)^2 / (var0 + var1 + eps), descending, ties to the lower index.

    ``labels`` are 0 for LUAD and 1 for LUSC; both classes must be present.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise HistokitError("features must be a 2-d matrix")
    if k > x.shape[1]:
        raise HistokitError(f"cannot select {k} of {x.shape[1]} features")
    if len(np.unique(y)) < 2:
        raise HistokitError("feature selection needs both classes present")
    a = x[y == 0]
    b = x[y == 1]
    score = (a.mean(axis=0) - b.mean(axis=0)) ** 2 / (a.var(axis=0) + b.var(axis=0) + EPS)
    order = np.argsort(-score, kind="stable")
    return [int(i) for i in order[:k]]


def classification_accuracy(predictions, labels):
    """Fraction of correct slide calls."""
    if len(predictions) != len(labels):
        raise HistokitError("predictions and labels differ in length")
    if not len(labels):
        raise HistokitError("cannot score an empty prediction set")
    return sum(p == t for p, t in zip(predictions, labels)) / len(labels)


# ---------------------------------------------------------------------------
# Probability-map files: <prefix>.probmap.json header + <prefix>.probmap.bin
# little-endian float32, row-major, channel-interleaved (nd, luad, lusc).


def probmap_prefix(path):
    path = str(path)
    for suffix in (".probmap.json", ".probmap.bin"):
        if path.endswith(suffix):
            return path[: -len(suffix)]
    return path


def save_probmap(pmap, prefix):
    prefix = probmap_prefix(prefix)
    header = {
        "rows": pmap.rows,
        "cols": pmap.cols,
        "stride": pmap.stride,
        "patch_size": pmap.patch_size,
        "classes": list(CLASSES),
        "slide_id": pmap.slide_id,
    }
    with open(prefix + ".probmap.json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    data = np.ascontiguousarray(pmap.values, dtype="<f4")
    with open(prefix + ".probmap.bin", "wb") as fh:
        fh.write(data.tobytes())


def load_probmap(path):
    prefix = probmap_prefix(path)
    with open(prefix + ".probmap.json") as fh:
        header = json.load(fh)
    if header.get("classes") != list(CLASSES):
        raise HistokitError(f"{prefix}: unexpected class order {header.get('classes')}")
    rows, cols = header["rows"], header["cols"]
    with open(prefix + ".probmap.bin", "rb") as fh:
        raw = fh.read()
    expected = rows * cols * 3 * 4
    if len(raw) != expected:
        raise HistokitError(f"{prefix}: payload is {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<f4").reshape(rows, cols, 3)
    return ProbabilityMap(
        rows=rows,
        cols=cols,
        stride=header["stride"],
        patch_size=header["patch_size"],
        values=values.astype(np.float32),
        slide_id=header["slide_id"],
    )


# ---------------------------------------------------------------------------
# Feature CSV: slide_id, label (may be empty), then the 50 named columns.


def write_features_csv(path, rows):
    """rows: iterable of (slide_id, label or None, feature vector)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slide_id", "label", *FEATURE_NAMES])
        for slide_id, label, vec in rows:
            writer.writerow([slide_id, label or "", *[repr(float(v)) for v in vec]])


def read_features_csv(path):
    """Returns (slide_ids, labels-or-None, feature matrix)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[2:]) != FEATURE_NAMES:
            raise HistokitError(f"{path}: unexpected feature columns")
        ids, labels, rows = [], [], []
        for row in reader:
            ids.append(row[0])
            labels.append(row[1] or None)
            rows.append([float(v) for v in row[2:]])
    return ids, labels, np.asarray(rows, dtype=np.float64)
