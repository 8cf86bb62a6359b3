import math

import numpy as np
import pytest

from histokit.imaging import HistokitError
from histokit.patches import (
    AugmentationParams,
    CROP_SIZE,
    Patch,
    augment_params_stream,
    augment_patch,
    extract_boundaries,
    gen_nbd,
    gen_nbl,
    gen_sn,
    _sample_coords,
)


def _blank_patch(size=200):
    rng = np.random.default_rng(51)
    return Patch(
        image=rng.integers(0, 256, size=(size, size, 3)).astype(np.uint8),
        mask=rng.integers(0, 4, size=(size, size)).astype(np.int32),
        origin=(0, 0),
        size=size,
    )


def test_boundaries_single_pixel_instance():
    labels = np.zeros((5, 5), dtype=np.int32)
    labels[2, 2] = 1
    border = extract_boundaries(labels, 1)
    assert border[2, 2] and border.sum() == 1


def test_boundaries_square_perimeter():
    labels = np.zeros((14, 14), dtype=np.int32)
    labels[2:12, 2:12] = 1
    border = extract_boundaries(labels, 1)
    # perimeter ring of a 10x10 square: 4*10 - 4
    assert border.sum() == 36
    assert not border[4:10, 4:10].any()


def test_boundaries_between_abutting_instances():
    labels = np.zeros((6, 8), dtype=np.int32)
    labels[1:5, 1:4] = 1
    labels[1:5, 4:7] = 2
    border = extract_boundaries(labels, 1)
    assert border[2, 3] and border[2, 4]  # both sides of the shared edge


def test_boundaries_thickness_validation():
    with pytest.raises(HistokitError):
        extract_boundaries(np.zeros((3, 3), dtype=np.int32), 0)


def test_nbl_window_arithmetic_500():
    rng = np.random.default_rng(53)
    tile = rng.integers(0, 256, size=(500, 500, 3)).astype(np.uint8)
    mask = np.zeros((500, 500), dtype=np.int32)
    patches = gen_nbl(tile, mask, seed=9)
    assert len(patches) == 36 + 30
    sliding = [p.origin for p in patches[:36]]
    assert sliding == [(r, c) for r in range(0, 301, 54) for c in range(0, 301, 54)]
    assert all(p.image.shape == (200, 200, 3) for p in patches)


def test_nbl_minimal_tile_single_window():
    tile = np.zeros((200, 200, 3), dtype=np.uint8)
    mask = np.zeros((200, 200), dtype=np.int32)
    patches = gen_nbl(tile, mask, seed=1)
    assert patches[0].origin == (0, 0)
    assert all(p.origin == (0, 0) for p in patches)


def test_nbl_deterministic_per_seed():
    rng = np.random.default_rng(59)
    tile = rng.integers(0, 256, size=(420, 380, 3)).astype(np.uint8)
    mask = np.zeros(tile.shape[:2], dtype=np.int32)
    a = [p.origin for p in gen_nbl(tile, mask, seed=4)]
    b = [p.origin for p in gen_nbl(tile, mask, seed=4)]
    c = [p.origin for p in gen_nbl(tile, mask, seed=5)]
    assert a == b
    assert a != c


def test_nbl_rejects_small_tile():
    with pytest.raises(HistokitError):
        gen_nbl(np.zeros((150, 220, 3), np.uint8), np.zeros((150, 220), np.int32), seed=0)


def test_nbd_centering_and_edge_skip():
    tile = np.zeros((500, 500, 3), dtype=np.uint8)
    mask = np.zeros((500, 500), dtype=np.int32)
    mask[248:253, 248:253] = 1  # centroid (250, 250)
    mask[40:61, 40:61] = 2  # centroid (50, 50): window exits the tile
    patches = gen_nbd(tile, mask)
    assert len(patches) == 1
    assert patches[0].origin == (150, 150)


def test_nbd_empty_mask():
    assert gen_nbd(np.zeros((300, 300, 3), np.uint8), np.zeros((300, 300), np.int32)) == []


def _patch_with_center_fraction(n_nuclei_px):
    image = np.zeros((200, 200, 3), dtype=np.uint8)
    mask = np.zeros((200, 200), dtype=np.int32)
    center = np.zeros(54 * 54, dtype=np.int32)
    center[:n_nuclei_px] = 1
    mask[73:127, 73:127] = center.reshape(54, 54)
    return Patch(image=image, mask=mask, origin=(0, 0), size=200)


def test_sn_empty_center_kept_three_times():
    out = gen_sn([_patch_with_center_fraction(0)])
    assert len(out) == 3


def test_sn_full_center_excluded():
    assert gen_sn([_patch_with_center_fraction(54 * 54)]) == []


def test_sn_boundary_is_inclusive():
    assert len(gen_sn([_patch_with_center_fraction(1458)])) == 3  # 50% exactly
    assert gen_sn([_patch_with_center_fraction(1459)]) == []


def test_sn_is_subset_of_triplicated_nbl():
    rng = np.random.default_rng(61)
    tile = rng.integers(0, 256, size=(400, 400, 3)).astype(np.uint8)
    mask = (rng.random((400, 400)) < 0.4).astype(np.int32)
    nbl = gen_nbl(tile, mask, seed=2)
    sn = gen_sn(nbl)
    assert len(sn) % 3 == 0
    ids = {id(p) for p in nbl}
    assert all(id(p) in ids for p in sn)


def test_augment_identity_is_bit_exact_center_crop():
    patch = _blank_patch()
    out = augment_patch(patch, AugmentationParams())
    assert out.size == CROP_SIZE
    assert np.array_equal(out.image, patch.image[49:151, 49:151])
    assert np.array_equal(out.mask, patch.mask[49:151, 49:151])


def test_augment_flip_involution():
    patch = _blank_patch()
    identity = augment_patch(patch, AugmentationParams())
    flipped = augment_patch(patch, AugmentationParams(flip_h=True))
    assert np.array_equal(np.flip(flipped.image, axis=1), identity.image)
    flipped_v = augment_patch(patch, AugmentationParams(flip_v=True))
    assert np.array_equal(np.flip(flipped_v.image, axis=0), identity.image)


def test_augment_rotation_maps_marked_pixel_analytically():
    image = np.zeros((200, 200, 3), dtype=np.uint8)
    mask = np.zeros((200, 200), dtype=np.int32)
    src = (60, 70)  # (row, col)
    mask[src] = 9
    image[src] = 255
    patch = Patch(image=image, mask=mask, origin=(0, 0), size=200)
    params = AugmentationParams(rotation_deg=90.0)
    out = augment_patch(patch, params)
    # forward map: o = R(p - c) + c with c = 99.5, acting on (x, y)
    theta = math.radians(90.0)
    px, py = src[1] - 99.5, src[0] - 99.5
    ox = math.cos(theta) * px - math.sin(theta) * py + 99.5 - 49
    oy = math.sin(theta) * px + math.cos(theta) * py + 99.5 - 49
    hits = np.argwhere(out.mask == 9)
    assert hits.size > 0
    dist = np.sqrt(((hits - [oy, ox]) ** 2).sum(axis=1))
    assert dist.max() <= 1.0


def test_augment_preserves_mask_labels():
    patch = _blank_patch()
    rng = np.random.default_rng(67)
    for _ in range(5):
        params = AugmentationParams.sample(rng)
        out = augment_patch(patch, params)
        assert set(np.unique(out.mask)) <= set(np.unique(patch.mask))
        assert out.image.shape == (CROP_SIZE, CROP_SIZE, 3)


def test_augment_deterministic_given_params():
    patch = _blank_patch()
    params = AugmentationParams.sample(np.random.default_rng(71))
    a = augment_patch(patch, params)
    b = augment_patch(patch, params)
    assert np.array_equal(a.image, b.image) and np.array_equal(a.mask, b.mask)


def test_shift_rotation_flip_ranges_stay_inside_source():
    """The 200->102 margin keeps sampling strictly inside for the shift,
    rotation and flip ranges (resize 1, no shear) -- the margin's purpose."""
    for shift_y in (-0.05, 0.0, 0.05):
        for shift_x in (-0.05, 0.0, 0.05):
            for rot in (-45.0, -20.0, 0.0, 20.0, 45.0):
                for flip_h in (False, True):
                    for flip_v in (False, True):
                        params = AugmentationParams(
                            shift_y=shift_y,
                            shift_x=shift_x,
                            rotation_deg=rot,
                            flip_h=flip_h,
                            flip_v=flip_v,
                        )
                        sx, sy = _sample_coords(params, 200, CROP_SIZE)
                        assert sx.min() >= 0 and sx.max() <= 199
                        assert sy.min() >= 0 and sy.max() <= 199


def test_extreme_params_clamp_instead_of_padding():
    patch = _blank_patch()
    params = AugmentationParams(shear=0.4 * math.pi, resize=0.6, rotation_deg=45.0)
    out = augment_patch(patch, params)
    # clamped sampling can only replicate source pixels, never invent zeros
    assert set(np.unique(out.mask)) <= set(np.unique(patch.mask))


def test_param_stream_ranges_and_determinism():
    a = augment_params_stream(7, 3, 11, count=3)
    b = augment_params_stream(7, 3, 11, count=3)
    assert a == b
    c = augment_params_stream(7, 3, 12, count=3)
    assert a != c
    for p in a:
        assert -0.05 <= p.shift_y <= 0.05 and -0.05 <= p.shift_x <= 0.05
        assert -45.0 <= p.rotation_deg <= 45.0
        assert -0.4 * math.pi <= p.shear <= 0.4 * math.pi
        assert 0.6 <= p.resize <= 2.0
