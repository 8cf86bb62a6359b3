import numpy as np
import pytest

from histokit.classify import (
    FEATURE_NAMES,
    N_FEATURES,
    ProbabilityMap,
    classification_accuracy,
    extract_features,
    load_probmap,
    max_vote,
    positive_patch_counts,
    read_features_csv,
    save_probmap,
    select_features,
    write_features_csv,
)
from histokit.imaging import HistokitError


def _pmap(values, slide_id="s"):
    values = np.asarray(values, dtype=np.float32)
    return ProbabilityMap(
        rows=values.shape[0],
        cols=values.shape[1],
        stride=256,
        patch_size=256,
        values=values,
        slide_id=slide_id,
    )


def _uniform_map(rows, cols, triple):
    return _pmap(np.tile(np.asarray(triple, dtype=np.float32), (rows, cols, 1)))


def test_counts_degenerate_all_nd():
    pmap = _uniform_map(4, 5, (1.0, 0.0, 0.0))
    assert positive_patch_counts(pmap) == (20, 0, 0)


def test_counts_by_construction():
    values = np.zeros((2, 2, 3), dtype=np.float32)
    values[0, 0] = (0.2, 0.5, 0.3)
    values[0, 1] = (0.2, 0.6, 0.2)
    values[1, 0] = (0.1, 0.2, 0.7)
    values[1, 1] = (0.8, 0.1, 0.1)
    assert positive_patch_counts(_pmap(values)) == (1, 2, 1)


def test_counts_three_way_tie_goes_to_nd():
    third = 1.0 / 3.0
    pmap = _uniform_map(3, 3, (third, third, third))
    assert positive_patch_counts(pmap) == (9, 0, 0)


def test_counts_sum_to_grid():
    rng = np.random.default_rng(73)
    raw = rng.random((6, 7, 3)).astype(np.float32)
    raw /= raw.sum(axis=2, keepdims=True)
    assert sum(positive_patch_counts(_pmap(raw))) == 42


def test_max_vote_majorities():
    values = np.tile(np.asarray((0.2, 0.5, 0.3), np.float32), (4, 10, 1))
    values[:, 7:] = (0.2, 0.3, 0.5)  # 30 luad vs 12 lusc
    assert max_vote(_pmap(values)) == "LUAD"
    assert max_vote(_pmap(values[:, ::-1])) == "LUAD"
    values[:, 3:] = (0.2, 0.3, 0.5)  # 12 luad vs 28 lusc
    assert max_vote(_pmap(values)) == "LUSC"


def test_max_vote_count_tie_uses_mean_probability():
    values = np.zeros((1, 2, 3), dtype=np.float32)
    values[0, 0] = (0.1, 0.6, 0.3)  # one luad patch
    values[0, 1] = (0.1, 0.2, 0.7)  # one lusc patch, larger winning margin
    assert max_vote(_pmap(values)) == "LUSC"  # mean lusc 0.5 > mean luad 0.4


def test_max_vote_full_tie_defaults_luad():
    values = np.zeros((1, 2, 3), dtype=np.float32)
    values[0, 0] = (0.1, 0.6, 0.3)
    values[0, 1] = (0.1, 0.3, 0.6)
    assert max_vote(_pmap(values)) == "LUAD"


def test_probability_validation():
    bad = np.full((2, 2, 3), 0.5, dtype=np.float32)
    with pytest.raises(HistokitError):
        _pmap(bad)


def test_features_uniform_map():
    pmap = _uniform_map(5, 5, (0.1, 0.8, 0.1))
    feats = dict(zip(FEATURE_NAMES, extract_features(pmap)))
    assert feats["luad_mean"] == pytest.approx(0.8, abs=1e-6)
    assert feats["luad_median"] == pytest.approx(0.8, abs=1e-6)
    assert feats["luad_variance"] == pytest.approx(0.0, abs=1e-9)
    assert feats["luad_positive_fraction"] == 1.0
    assert feats["luad_top1_area_t0.5"] == 1.0
    assert feats["luad_top2_area_t0.5"] == 0.0


def test_features_zero_luad_channel():
    pmap = _uniform_map(4, 4, (0.5, 0.0, 0.5))
    feats = dict(zip(FEATURE_NAMES, extract_features(pmap)))
    assert feats["luad_mean"] == 0.0
    assert feats["luad_variance"] == 0.0
    assert feats["luad_positive_fraction"] == 0.0
    assert feats["count_ratio_luad"] == 0.0
    assert feats["mean_ratio_luad"] == pytest.approx(0.0, abs=1e-8)
    assert feats["luad_top1_area_t0.5"] == 0.0


def test_features_component_fixture():
    values = np.zeros((6, 6, 3), dtype=np.float32)
    values[:, :] = (0.8, 0.1, 0.1)
    for r, c in [(0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (1, 2), (1, 3)]:
        values[r, c] = (0.2, 0.7, 0.1)  # 8-cell luad blob
    for r, c in [(4, 0), (4, 1), (4, 2)]:
        values[r, c] = (0.2, 0.7, 0.1)  # 3-cell luad blob
    feats = dict(zip(FEATURE_NAMES, extract_features(_pmap(values))))
    grid = 36.0
    assert feats["luad_top1_area_t0.5"] == pytest.approx(8 / grid)
    assert feats["luad_top2_area_t0.5"] == pytest.approx(3 / grid)
    assert feats["luad_top3_area_t0.5"] == 0.0
    assert feats["luad_component_count_t0.5"] == 2.0
    assert feats["luad_total_area_t0.5"] == pytest.approx(11 / grid)


def test_features_always_fifty_and_finite():
    rng = np.random.default_rng(79)
    for _ in range(10):
        raw = rng.random((8, 9, 3)).astype(np.float32)
        raw /= raw.sum(axis=2, keepdims=True)
        feats = extract_features(_pmap(raw))
        assert feats.shape == (N_FEATURES,)
        assert np.all(np.isfinite(feats))


def test_statistical_features_permutation_invariant():
    rng = np.random.default_rng(83)
    raw = rng.random((6, 6, 3)).astype(np.float32)
    raw /= raw.sum(axis=2, keepdims=True)
    feats = extract_features(_pmap(raw))
    flat = raw.reshape(-1, 3)[rng.permutation(36)].reshape(6, 6, 3)
    permuted = extract_features(_pmap(flat))
    # statistical features (indices 0-9) ignore patch order
    assert np.allclose(feats[:10], permuted[:10], atol=1e-12)


def test_component_features_translation_invariant():
    values = np.zeros((8, 8, 3), dtype=np.float32)
    values[:, :] = (0.8, 0.1, 0.1)
    values[0:2, 0:3] = (0.2, 0.7, 0.1)
    shifted = np.roll(values, shift=(3, 4), axis=(0, 1))
    a = extract_features(_pmap(values))
    b = extract_features(_pmap(shifted))
    assert np.allclose(a[10:], b[10:])


def test_argmax_scale_invariance():
    rng = np.random.default_rng(89)
    raw = rng.random((5, 5, 3)).astype(np.float64)
    raw /= raw.sum(axis=2, keepdims=True)
    scaled = (raw * 7.3) / (raw * 7.3).sum(axis=2, keepdims=True)
    a = _pmap(raw.astype(np.float32))
    b = _pmap(scaled.astype(np.float32))
    assert positive_patch_counts(a) == positive_patch_counts(b)
    assert max_vote(a) == max_vote(b)


def test_select_features_orders_by_separability():
    rng = np.random.default_rng(97)
    n = 40
    x = np.zeros((n, 3))
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    x[:, 0] = np.where(y == 0, 0.05, 1.05) + rng.normal(0, 0.01, n)
    x[:, 1] = 0.5  # constant: zero separability
    x[:, 2] = rng.normal(0, 1, n)  # noise
    order = select_features(x, y, k=3)
    assert order[0] == 0
    assert select_features(x, y, k=1) == [0]


def test_select_features_all_sorted_and_ties_by_index():
    rng = np.random.default_rng(101)
    x = rng.random((30, 4))
    x[:, 3] = x[:, 1]  # duplicate column -> equal scores, lower index first
    y = np.array([0, 1] * 15)
    order = select_features(x, y, k=4)
    assert len(order) == 4
    assert order.index(1) < order.index(3)


def test_select_features_needs_both_classes():
    with pytest.raises(HistokitError):
        select_features(np.zeros((4, 2)), np.zeros(4, dtype=int), k=1)


def test_accuracy_granularity():
    assert classification_accuracy(["LUAD"] * 4, ["LUAD"] * 4) == 1.0
    preds = ["LUAD"] * 26 + ["LUSC"] * 6
    truth = ["LUAD"] * 32
    assert classification_accuracy(preds, truth) == 0.8125  # 26/32
    preds = ["LUAD"] * 25 + ["LUSC"] * 7
    assert classification_accuracy(preds, truth) == 0.78125  # 25/32
    with pytest.raises(HistokitError):
        classification_accuracy([], [])


def test_probmap_file_roundtrip(tmp_path):
    rng = np.random.default_rng(103)
    raw = rng.random((7, 5, 3)).astype(np.float32)
    raw /= raw.sum(axis=2, keepdims=True)
    pmap = _pmap(raw, slide_id="slide-7")
    save_probmap(pmap, tmp_path / "slide-7")
    back = load_probmap(tmp_path / "slide-7.probmap.json")
    assert back.slide_id == "slide-7"
    assert back.rows == 7 and back.cols == 5
    assert np.array_equal(back.values, pmap.values)


def test_probmap_payload_length_guard(tmp_path):
    rng = np.random.default_rng(109)
    raw = rng.random((4, 4, 3)).astype(np.float32)
    raw /= raw.sum(axis=2, keepdims=True)
    save_probmap(_pmap(raw, slide_id="x"), tmp_path / "x")
    payload = (tmp_path / "x.probmap.bin").read_bytes()
    (tmp_path / "x.probmap.bin").write_bytes(payload[:-4])
    with pytest.raises(HistokitError, match="bytes"):
        load_probmap(tmp_path / "x.probmap.json")


def test_features_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(107)
    vec_a = rng.random(N_FEATURES)
    vec_b = rng.random(N_FEATURES)
    path = tmp_path / "features.csv"
    write_features_csv(path, [("a", "LUAD", vec_a), ("b", None, vec_b)])
    ids, labels, x = read_features_csv(path)
    assert ids == ["a", "b"]
    assert labels == ["LUAD", None]
    assert np.array_equal(x[0], vec_a) and np.array_equal(x[1], vec_b)
