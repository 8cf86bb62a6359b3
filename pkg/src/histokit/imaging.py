"""Raster types, morphology primitives and bit-exact PNG I/O.

Conventions used across the package:

* RGB image  -- uint8 array of shape (H, W, 3)
* binary mask -- bool array of shape (H, W)
* labeled mask -- int32 array of shape (H, W), 0 = background, positive ids
  name instances; ids need not be contiguous and an instance need not be
  connected unless the producing operation says so.

File formats: labeled masks are 16-bit grayscale PNG (id == pixel value),
binary masks 8-bit grayscale PNG (any nonzero loads as foreground), tiles
8-bit RGB PNG.
"""

import numpy as np
from PIL import Image

from . import kernels


class HistokitError(Exception):
    """Raised on contract violations (dimension mismatches, empty inputs...)."""


def as_binary_mask(arr):
    a = np.asarray(arr)
    if a.ndim != 2:
        raise HistokitError(f"binary mask must be 2-d, got shape {a.shape}")
    return np.ascontiguousarray(a.astype(bool))


def as_labeled_mask(arr):
    a = np.asarray(arr)
    if a.ndim != 2:
        raise HistokitError(f"labeled mask must be 2-d, got shape {a.shape}")
    if a.size and a.min() < 0:
        raise HistokitError("labeled mask ids must be non-negative")
    return np.ascontiguousarray(a.astype(np.int32))


def check_same_shape(a, b, what="masks"):
    if a.shape[:2] != b.shape[:2]:
        raise HistokitError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def area_threshold_px(min_area_um2, mpp):
    """Pixel-area threshold for a physical area at a given resolution."""
    if mpp <= 0:
        raise HistokitError(f"mpp must be positive, got {mpp}")
    return min_area_um2 / (mpp * mpp)


def binarize(labels):
    """Foreground flag per pixel: label != 0."""
    return as_labeled_mask(labels) > 0


def renumber_first_encounter(labels):
    """Remap nonzero ids to 1..k in row-major first-encounter order."""
    labels = np.ascontiguousarray(labels)
    flat = labels.ravel()
    idx = np.flatnonzero(flat)
    if idx.size == 0:
        return np.zeros(labels.shape, dtype=np.int32)
    vals = flat[idx]
    uniq, first = np.unique(vals, return_index=True)
    rank = np.empty(uniq.size, dtype=np.int32)
    rank[np.argsort(first, kind="stable")] = np.arange(1, uniq.size + 1, dtype=np.int32)
    out = np.zeros(flat.size, dtype=np.int32)
    out[idx] = rank[np.searchsorted(uniq, vals)]
    return out.reshape(labels.shape)


def connected_components(mask, connectivity=8):
    """Label contiguous foreground regions 1..k in first-encounter order.

    Default connectivity is 8 (nuclei blobs are not axis-aligned); pass 4 for
    edge-adjacency only.
    """
    if connectivity not in (4, 8):
        raise HistokitError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = as_binary_mask(mask)
    return renumber_first_encounter(kernels.label_components(mask, connectivity))


def dilate(mask, kernel_size):
    """Binary dilation with an odd square kernel; the window clamps at edges."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise HistokitError(f"kernel size must be odd and >= 1, got {kernel_size}")
    return kernels.dilate_bool(as_binary_mask(mask), kernel_size)


def nearest_nonzero(labels, at):
    """Id of the nonzero pixel closest (Euclidean) to ``at`` = (row, col).

    Ties resolve to the candidate pixel with the smaller (row, col); the id
    tie-break is vacuous for distinct pixels but kept for determinism.
    """
    labels = as_labeled_mask(labels)
    rows, cols = np.nonzero(labels)
    if rows.size == 0:
        raise HistokitError("no cores: labeled mask has no nonzero pixel")
    r, c = at
    out = kernels.assign_nearest(
        np.asarray([r], dtype=np.int64),
        np.asarray([c], dtype=np.int64),
        rows.astype(np.int64),
        cols.astype(np.int64),
        labels[rows, cols],
        labels.shape[0],
        labels.shape[1],
    )
    return int(out[0])


# ---------------------------------------------------------------------------
# PNG I/O


def save_labeled_mask(path, labels):
    labels = as_labeled_mask(labels)
    if labels.size and labels.max() > np.iinfo(np.uint16).max:
        raise HistokitError("labeled mask has ids beyond the 16-bit PNG range")
    Image.fromarray(labels.astype(np.uint16)).save(path, format="PNG")


def load_labeled_mask(path):
    arr = np.array(Image.open(path))
    if arr.ndim != 2:
        raise HistokitError(f"{path}: expected grayscale labeled mask")
    return arr.astype(np.int32)


def save_binary_mask(path, mask):
    mask = as_binary_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path, format="PNG")


def load_binary_mask(path):
    arr = np.array(Image.open(path).convert("L"))
    return arr != 0


def save_rgb(path, image):
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise HistokitError("RGB image must be uint8 with shape (H, W, 3)")
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def load_rgb(path):
    return np.array(Image.open(path).convert("RGB"))
