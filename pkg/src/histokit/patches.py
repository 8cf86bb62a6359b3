"""Training-patch datasets and geometric augmentation.

Three datasets come out of a (tile, labeled mask) pair:

* nbl -- 200x200 windows slid with a 54 px step plus 30 seeded random crops
* nbd -- one 200x200 window centered on each nucleus (edge nuclei skipped)
* sn  -- the nbl patches whose central 54x54 region is at most half nuclei,
         each duplicated 3 times

Augmentation composes scale(resize) . rotate . shear . translate(shift*size)
about the patch center, then flips, samples the image bilinearly and the mask
nearest-neighbor, and center-crops to 102x102. Sampling coordinates clamp at
the patch edge, so no zero padding is ever introduced; the 200->102 margin
keeps every sample strictly inside for the shift/rotation/flip ranges, while
extreme shear or downscaling rely on the clamp.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .imaging import HistokitError, as_labeled_mask, check_same_shape
from .rng import derive_seed, generator

CROP_SIZE = 102
SN_CENTER = 54
SN_MAX_FRACTION = 0.5


def extract_boundaries(mask, thickness):
    """Instance pixels within Chebyshev ``thickness`` of another label or
    background; out-of-image neighbors do not count."""
    if thickness < 1:
        raise HistokitError(f"boundary thickness must be >= 1, got {thickness}")
    return kernels.boundary_mask(as_labeled_mask(mask), int(thickness))


@dataclass(frozen=True)
class Patch:
    image: np.ndarray
    mask: np.ndarray
    origin: tuple
    size: int


@dataclass(frozen=True)
class AugmentationParams:
    shift_y: float = 0.0
    shift_x: float = 0.0
    rotation_deg: float = 0.0
    flip_h: bool = False
    flip_v: bool = False
    shear: float = 0.0
    resize: float = 1.0
    seed: int = 0

    @classmethod
    def sample(cls, rng, seed=0):
        return cls(
            shift_y=rng.uniform(-0.05, 0.05),
            shift_x=rng.uniform(-0.05, 0.05),
            rotation_deg=rng.uniform(-45.0, 45.0),
            flip_h=bool(rng.random() < 0.5),
            flip_v=bool(rng.random() < 0.5),
            shear=rng.uniform(-0.4 * math.pi, 0.4 * math.pi),
            resize=rng.uniform(0.6, 2.0),
            seed=seed,
        )


def augment_params_stream(dataset_seed, tile_index, patch_index, count=3):
    """The per-patch parameter draws; independent of generation order."""
    seed = derive_seed(dataset_seed, tile_index, patch_index)
    rng = generator(seed)
    return [AugmentationParams.sample(rng, seed=seed) for _ in range(count)]


def _extract(tile, mask, origin, size):
    r, c = origin
    return Patch(
        image=np.ascontiguousarray(tile[r : r + size, c : c + size]),
        mask=np.ascontiguousarray(mask[r : r + size, c : c + size]),
        origin=(int(r), int(c)),
        size=int(size),
    )


def gen_nbl(tile, mask, step=54, size=200, random_crops=30, seed=0):
    """Window-slide patches plus seeded random crops, all fully inside."""
    mask = as_labeled_mask(mask)
    check_same_shape(tile, mask, "tile/mask")
    h, w = mask.shape
    if h < size or w < size:
        raise HistokitError(f"tile {h}x{w} smaller than the {size}x{size} window")
    patches = [
        _extract(tile, mask, (r, c), size)
        for r in range(0, h - size + 1, step)
        for c in range(0, w - size + 1, step)
    ]
    rng = generator(seed)
    for _ in range(random_crops):
        r = int(rng.integers(0, h - size + 1))
        c = int(rng.integers(0, w - size + 1))
        patches.append(_extract(tile, mask, (r, c), size))
    return patches


def gen_nbd(tile, mask, size=200):
    """One patch per instance, centered on its centroid; instances whose
    window would leave the tile are skipped."""
    mask = as_labeled_mask(mask)
    check_same_shape(tile, mask, "tile/mask")
    h, w = mask.shape
    patches = []
    for inst in np.unique(mask):
        if inst == 0:
            continue
        rows, cols = np.nonzero(mask == inst)
        cy = int(math.floor(rows.mean() + 0.5))
        cx = int(math.floor(cols.mean() + 0.5))
        r, c = cy - size // 2, cx - size // 2
        if r < 0 or c < 0 or r + size > h or c + size > w:
            continue
        patches.append(_extract(tile, mask, (r, c), size))
    return patches


def sn_eligible(patch, center=SN_CENTER, max_fraction=SN_MAX_FRACTION):
    """Central-region nuclei fraction at most ``max_fraction`` (inclusive)."""
    start = (patch.size - center) // 2
    region = patch.mask[start : start + center, start : start + center]
    return int(np.count_nonzero(region)) <= max_fraction * center * center


def gen_sn(nbl_patches, duplicates=3):
    out = []
    for patch in nbl_patches:
        if sn_eligible(patch):
            out.extend([patch] * duplicates)
    return out


def _affine_matrix(params, size):
    """Forward 2x2 linear part and translation of the composed transform,
    acting on (x, y) = (col, row) about the patch center."""
    theta = math.radians(params.rotation_deg)
    s = np.array([[params.resize, 0.0], [0.0, params.resize]])
    r = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    sh = np.array([[1.0, math.tan(params.shear)], [0.0, 1.0]])
    m = s @ r @ sh
    t = np.array([params.shift_x * size, params.shift_y * size])
    return m, t


def _sample_coords(params, size, crop):
    """Source (x, y) coordinates for every output pixel of the crop."""
    off = (size - crop) // 2
    ys, xs = np.mgrid[0:crop, 0:crop]
    qx = (xs + off).astype(np.float64)
    qy = (ys + off).astype(np.float64)
    if params.flip_h:
        qx = (size - 1) - qx
    if params.flip_v:
        qy = (size - 1) - qy
    m, t = _affine_matrix(params, size)
    minv = np.linalg.inv(m)
    c = (size - 1) / 2.0
    rx = qx - c
    ry = qy - c
    sx = minv[0, 0] * rx + minv[0, 1] * ry + c - t[0]
    sy = minv[1, 0] * rx + minv[1, 1] * ry + c - t[1]
    return sx, sy


def _bilinear(image, sx, sy):
    h, w = image.shape[:2]
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    img = image.astype(np.float64)
    val = (
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x1] * fx * (1 - fy)
        + img[y1, x0] * (1 - fx) * fy
        + img[y1, x1] * fx * fy
    )
    return np.rint(val).astype(np.uint8)


def _nearest(mask, sx, sy):
    h, w = mask.shape
    x = np.clip(np.floor(sx + 0.5).astype(np.int64), 0, w - 1)
    y = np.clip(np.floor(sy + 0.5).astype(np.int64), 0, h - 1)
    return mask[y, x]


def augment_patch(patch, params):
    """Apply the composed transform and return the 102x102 center crop."""
    if patch.image.shape[0] != patch.size or patch.image.shape[1] != patch.size:
        raise HistokitError("patch image does not match its declared size")
    sx, sy = _sample_coords(params, patch.size, CROP_SIZE)
    return Patch(
        image=_bilinear(patch.image, sx, sy),
        mask=_nearest(patch.mask, sx, sy).astype(np.int32),
        origin=patch.origin,
        size=CROP_SIZE,
    )
