"""Blob/border masks -> instance segmentation.

Pipeline: subtract the dilated border from the blob mask, split the remaining
cores with a marker-controlled watershed on the exact Euclidean distance
transform, hand every removed pixel back to its closest core, then drop
instances below the physical area threshold.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .imaging import (
    HistokitError,
    area_threshold_px,
    as_binary_mask,
    as_labeled_mask,
    check_same_shape,
    connected_components,
    dilate,
    renumber_first_encounter,
)

log = logging.getLogger(__name__)

_OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class SegmentationConfig:
    mpp: float
    border_dilation_kernel: int = 3
    min_area_um2: float = 13.0
    watershed_smoothing: int = 1

    def __post_init__(self):
        if self.mpp <= 0:
            raise HistokitError(f"mpp must be positive, got {self.mpp}")
        if self.border_dilation_kernel < 1 or self.border_dilation_kernel % 2 == 0:
            raise HistokitError("border dilation kernel must be odd and >= 1")
        if self.min_area_um2 < 0:
            raise HistokitError("min_area_um2 must be >= 0")
        if self.watershed_smoothing < 0:
            raise HistokitError("watershed_smoothing must be >= 0")


def fuse_masks(blob, border, cfg):
    """Core mask: blob minus the dilated border."""
    blob = as_binary_mask(blob)
    border = as_binary_mask(border)
    check_same_shape(blob, border, "blob/border masks")
    return blob & ~dilate(border, cfg.border_dilation_kernel)


def _box_sum(values, radius):
    """Window sum over a (2r+1)^2 window clamped at the edges, exact in int64."""
    h, w = values.shape
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    sat[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
    i = np.arange(h)
    j = np.arange(w)
    lo_i = np.maximum(i - radius, 0)
    hi_i = np.minimum(i + radius, h - 1) + 1
    lo_j = np.maximum(j - radius, 0)
    hi_j = np.minimum(j + radius, w - 1) + 1
    return (
        sat[hi_i[:, None], hi_j[None, :]]
        - sat[lo_i[:, None], hi_j[None, :]]
        - sat[hi_i[:, None], lo_j[None, :]]
        + sat[lo_i[:, None], lo_j[None, :]]
    )


def _regional_max_markers(d2, mask, smoothing_radius):
    """Label the regional-maximum plateaus of the (optionally smoothed) surface.

    A plateau counts as a regional maximum when no member pixel has a strictly
    greater in-mask neighbor (8-connected).
    """
    surface = _box_sum(d2, smoothing_radius) if smoothing_radius > 0 else d2
    plateaus = kernels.plateau_components(surface, mask)
    h, w = mask.shape
    greater = np.zeros((h, w), dtype=bool)
    for dr, dc in _OFFSETS_8:
        sr0, sr1 = max(0, -dr), min(h, h - dr)
        tr0 = max(0, dr)
        sc0, sc1 = max(0, -dc), min(w, w - dc)
        tc0 = max(0, dc)
        tgt = (slice(tr0, tr0 + (sr1 - sr0)), slice(tc0, tc0 + (sc1 - sc0)))
        src = (slice(sr0, sr1), slice(sc0, sc1))
        greater[tgt] |= mask[src] & (surface[src] > surface[tgt])
    greater &= mask
    n = int(plateaus.max())
    has_greater = np.bincount(
        plateaus[mask], weights=greater[mask].astype(np.float64), minlength=n + 1
    ) > 0
    markers = np.where(mask & ~has_greater[plateaus], plateaus, 0)
    return renumber_first_encounter(markers)


def watershed_split(core, cfg):
    """Partition the core mask into labeled nuclei cores.

    Markers are the regional maxima of the distance transform; flooding runs
    on the raw squared distances, confined to the core foreground, so every
    core pixel ends up with exactly one nonzero id.
    """
    core = as_binary_mask(core)
    if not core.any():
        return np.zeros(core.shape, dtype=np.int32)
    d2 = kernels.squared_edt(core)
    markers = _regional_max_markers(d2, core, cfg.watershed_smoothing)
    return kernels.watershed_flood(d2, markers, core)


def assign_boundary_pixels(cores, blob, report=None):
    """Assign every unlabeled blob pixel to its closest core.

    Candidate cores are restricted to the pixel's blob connected component;
    components containing no core fall back to the globally nearest core. With
    no cores at all the blob is dropped entirely (and counted in ``report``).
    """
    cores = as_labeled_mask(cores)
    blob = as_binary_mask(blob)
    check_same_shape(cores, blob, "cores/blob masks")
    if ((cores > 0) & ~blob).any():
        raise HistokitError("core pixels must lie inside the blob mask")
    out = cores.copy()
    unlabeled = blob & (cores == 0)
    if not unlabeled.any():
        return out
    site_mask = cores > 0
    if not site_mask.any():
        dropped = int(unlabeled.sum())
        log.warning("no cores: dropping %d blob pixels", dropped)
        if report is not None:
            report["dropped_pixels"] = dropped
        return np.zeros(cores.shape, dtype=np.int32)

    h, w = blob.shape
    comp = connected_components(blob, 8)
    comp_of_sites = comp[site_mask]
    comps_with_cores = np.zeros(int(comp.max()) + 1, dtype=bool)
    comps_with_cores[comp_of_sites] = True

    all_rows, all_cols = np.nonzero(site_mask)
    all_ids = cores[all_rows, all_cols]

    def _assign(qmask, rows, cols, ids):
        qr, qc = np.nonzero(qmask)
        out[qr, qc] = kernels.assign_nearest(
            qr.astype(np.int64),
            qc.astype(np.int64),
            rows.astype(np.int64),
            cols.astype(np.int64),
            ids,
            h,
            w,
        )

    for cid in range(1, int(comp.max()) + 1):
        in_comp = comp == cid
        queries = unlabeled & in_comp
        if not queries.any():
            continue
        if comps_with_cores[cid]:
            rows, cols = np.nonzero(site_mask & in_comp)
            _assign(queries, rows, cols, cores[rows, cols])
        else:
            _assign(queries, all_rows, all_cols, all_ids)
    if report is not None:
        report["dropped_pixels"] = 0
    return out


def filter_small_instances(labels, cfg, report=None):
    """Drop instances whose pixel area falls below min_area_um2 / mpp^2.

    Instances exactly at the threshold are kept; survivor ids are unchanged.
    """
    labels = as_labeled_mask(labels)
    threshold = area_threshold_px(cfg.min_area_um2, cfg.mpp)
    if labels.size == 0 or labels.max() == 0:
        if report is not None:
            report["filtered_instances"] = 0
        return labels.copy()
    areas = np.bincount(labels.ravel())
    keep = areas.astype(np.float64) >= threshold
    keep[0] = True
    out = np.where(keep[labels], labels, 0).astype(np.int32)
    if report is not None:
        report["filtered_instances"] = int(np.count_nonzero(~keep[1:][areas[1:] > 0]))
    return out


def segment_instances(blob, border, cfg, report=None):
    """Full post-processing chain from blob/border masks to instance labels."""
    core = fuse_masks(blob, border, cfg)
    cores = watershed_split(core, cfg)
    full = assign_boundary_pixels(cores, blob, report=report)
    out = filter_small_instances(full, cfg, report=report)
    if report is not None:
        ids = np.unique(out)
        report["instance_count"] = int((ids > 0).sum())
    return out
