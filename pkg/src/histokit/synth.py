"""Synthetic fixtures and independent oracles.

The tile generator lays down flat-colored ellipses with controlled overlaps
and derives ground-truth labels plus noiseless blob/border masks, so the
whole segmentation chain is testable without challenge data. The probability
map generator plants one compact blob of the true class and several scattered
distractor blobs, which makes patch counts near-tied when no class dominates
while the component structure still identifies the truth.

``oracle_dice2`` is the literal nested-loop transcription of the Ensemble
Dice pseudo-code and stays deliberately naive; the production implementation
in ``metrics`` must match it to 1e-12.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .classify import CLASSES, ProbabilityMap
from .imaging import HistokitError, as_labeled_mask, check_same_shape
from .patches import extract_boundaries
from .rng import generator


@dataclass(frozen=True)
class SynthTileSpec:
    tile_size: int = 256
    count_range: tuple = (8, 16)
    radius_range: tuple = (10.0, 15.0)
    overlap_range: tuple = (0.0, 0.3)
    color_jitter: float = 12.0
    seed: int = 0

    def __post_init__(self):
        if self.radius_range[0] < 2:
            raise HistokitError("nucleus radii must be >= 2 px")
        if self.count_range[0] > self.count_range[1] or self.count_range[0] < 0:
            raise HistokitError("invalid nucleus count range")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        for key in ("count_range", "radius_range", "overlap_range"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class SynthSlideSpec:
    rows: int = 16
    cols: int = 16
    intensity: dict = field(
        default_factory=lambda: {"LUAD": (0.55, 0.9), "LUSC": (0.55, 0.9)}
    )
    positive_fraction: float = 0.4
    dominant_class_fraction: float = 0.5
    noise_level: float = 0.03
    distractor_blobs: int = 6
    stride: int = 256
    patch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.rows < 4 or self.cols < 4:
            raise HistokitError("probability-map grid must be at least 4x4")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if "intensity" in data:
            data["intensity"] = {k: tuple(v) for k, v in data["intensity"].items()}
        data.pop("true_class", None)
        return cls(**data)


_BACKGROUND = np.array([222, 196, 216], dtype=np.float64)
_NUCLEUS = np.array([94, 60, 150], dtype=np.float64)
# sub-pixel boundary gap used for "touching" placements: close enough that the
# blob masks fuse into one 8-connected component, while the label regions stay
# geometrically disjoint so the ground truth never has contested pixels
_TOUCH_SEAM = (0.4, 1.0)
_CLEAR_GAP = 4.0


def _support_radius(a, b, theta, ang):
    """Extent of an ellipse (semi-axes a, b rotated by theta) along ang."""
    psi = ang - theta
    return math.hypot(a * math.cos(psi), b * math.sin(psi))


def _place_nuclei(spec, rng):
    size = spec.tile_size
    count = int(rng.integers(spec.count_range[0], spec.count_range[1] + 1))
    overlap_frac = rng.uniform(*spec.overlap_range)
    nuclei = []  # (cy, cx, r_major, r_minor, theta)
    for _ in range(count):
        a = rng.uniform(*spec.radius_range)
        b = a * rng.uniform(0.8, 1.0)
        theta = rng.uniform(0.0, math.pi)
        margin = a + 3
        touching = bool(nuclei) and rng.random() < overlap_frac
        placed = False
        for _ in range(300):
            if touching:
                base = nuclei[int(rng.integers(0, len(nuclei)))]
                ang = rng.uniform(0.0, 2 * math.pi)
                dist = (
                    _support_radius(base[2], base[3], base[4], ang)
                    + _support_radius(a, b, theta, ang + math.pi)
                    + rng.uniform(*_TOUCH_SEAM)
                )
                cy = base[0] + dist * math.sin(ang)
                cx = base[1] + dist * math.cos(ang)
                if not (margin <= cy < size - margin and margin <= cx < size - margin):
                    continue
            else:
                cy = rng.uniform(margin, size - margin)
                cx = rng.uniform(margin, size - margin)
            clear = True
            for oy, ox, oa, ob, ot in nuclei:
                ang_o = math.atan2(cy - oy, cx - ox)
                boundary_dist = _support_radius(oa, ob, ot, ang_o) + _support_radius(
                    a, b, theta, ang_o + math.pi
                )
                gap = _TOUCH_SEAM[0] if touching else _CLEAR_GAP
                if math.hypot(cy - oy, cx - ox) < boundary_dist + gap:
                    clear = False
                    break
            if clear:
                nuclei.append((cy, cx, a, b, theta))
                placed = True
                break
        if not placed:
            raise HistokitError("infeasible nucleus packing for the given spec")
    return nuclei


def gen_synthetic_tile(spec):
    """Returns (rgb image, ground-truth labels, blob mask, border mask)."""
    rng = generator(spec.seed)
    size = spec.tile_size
    nuclei = _place_nuclei(spec, rng)
    labels = np.zeros((size, size), dtype=np.int32)
    for idx, (cy, cx, a, b, theta) in enumerate(nuclei, start=1):
        extent = int(math.ceil(a)) + 1
        y0, y1 = max(0, int(cy) - extent), min(size, int(cy) + extent + 1)
        x0, x1 = max(0, int(cx) - extent), min(size, int(cx) + extent + 1)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        dy = yy - cy
        dx = xx - cx
        u = (dx * math.cos(theta) + dy * math.sin(theta)) / a
        v = (-dx * math.sin(theta) + dy * math.cos(theta)) / b
        inside = u * u + v * v <= 1.0
        labels[y0:y1, x0:x1][inside] = idx

    image = np.empty((size, size, 3), dtype=np.float64)
    image[:] = _BACKGROUND + rng.normal(0.0, 2.0, size=(size, size, 3))
    for idx in range(1, len(nuclei) + 1):
        color = _NUCLEUS + rng.normal(0.0, spec.color_jitter, size=3)
        image[labels == idx] = color
    rgb = np.clip(np.rint(image), 0, 255).astype(np.uint8)

    blob = labels > 0
    border = extract_boundaries(labels, 2)
    return rgb, labels, blob, border


def _grow_blob(free, center, n_cells):
    """Indices of the n free cells nearest to center (compact disk-ish blob)."""
    rows, cols = np.nonzero(free)
    d2 = (rows - center[0]) ** 2 + (cols - center[1]) ** 2
    order = np.lexsort((cols, rows, d2))
    take = order[:n_cells]
    return rows[take], cols[take]


def gen_synthetic_probmap(spec, true_class, slide_id="synthetic"):
    """Probability map whose truth is carried by blob structure.

    The number of true-class positives is Binomial(n_positive, dominant
    fraction), so at 0.5 the class patch counts are near-tied across seeds.
    """
    if true_class not in ("LUAD", "LUSC"):
        raise HistokitError(f"true_class must be LUAD or LUSC, got {true_class}")
    rng = generator(spec.seed)
    r, c = spec.rows, spec.cols
    other = "LUSC" if true_class == "LUAD" else "LUAD"

    nd = rng.uniform(0.5, 0.8, size=(r, c))
    rest = 1.0 - nd
    split = rng.uniform(0.3, 0.7, size=(r, c))
    values = np.empty((r, c, 3), dtype=np.float64)
    values[:, :, 0] = nd
    values[:, :, CLASSES.index(true_class)] = rest * split
    values[:, :, CLASSES.index(other)] = rest * (1.0 - split)

    n_pos = int(round(spec.positive_fraction * r * c))
    n_true = int(rng.binomial(n_pos, spec.dominant_class_fraction))
    free = np.ones((r, c), dtype=bool)

    def plant(cls_name, center, n_cells):
        if n_cells <= 0:
            return
        rows, cols = _grow_blob(free, center, n_cells)
        free[rows, cols] = False
        p = rng.uniform(*spec.intensity[cls_name], size=rows.size)
        values[rows, cols, :] = ((1.0 - p) / 2.0)[:, None]
        values[rows, cols, CLASSES.index(cls_name)] = p

    plant(true_class, (int(rng.integers(0, r)), int(rng.integers(0, c))), n_true)
    n_rest = n_pos - n_true
    blobs = max(1, spec.distractor_blobs)
    sizes = [n_rest // blobs] * blobs
    for i in range(n_rest % blobs):
        sizes[i] += 1
    for sz in sizes:
        plant(other, (int(rng.integers(0, r)), int(rng.integers(0, c))), sz)

    if spec.noise_level > 0:
        values += rng.uniform(-spec.noise_level, spec.noise_level, size=values.shape)
    values = np.maximum(values, 1e-6)
    values /= values.sum(axis=2, keepdims=True)
    return ProbabilityMap(
        rows=r,
        cols=c,
        stride=spec.stride,
        patch_size=spec.patch_size,
        values=values.astype(np.float32),
        slide_id=slide_id,
    )


def oracle_dice2(gt, pred):
    """Ensemble Dice, transcribed literally from the published pseudo-code."""
    gt = as_labeled_mask(gt)
    pred = as_labeled_mask(pred)
    check_same_shape(gt, pred, "gt/pred masks")
    gt_flat = gt.ravel()
    pred_flat = pred.ravel()
    q_pixels = {
        int(q): np.flatnonzero(gt_flat == q) for q in np.unique(gt_flat) if q != 0
    }
    p_pixels = {
        int(p): np.flatnonzero(pred_flat == p) for p in np.unique(pred_flat) if p != 0
    }
    intersection_area = 0
    total_markup_area = 0
    for q, q_px in q_pixels.items():
        for p, p_px in p_pixels.items():
            overlap = np.intersect1d(q_px, p_px, assume_unique=True).size
            if overlap > 0:
                intersection_area += overlap
                total_markup_area += q_px.size + p_px.size
    if total_markup_area == 0:
        return 1.0 if not q_pixels and not p_pixels else 0.0
    return 2.0 * intersection_area / total_markup_area
