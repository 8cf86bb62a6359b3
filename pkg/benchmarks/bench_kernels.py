"""Benchmark the numba kernels against the pure numpy/python fallbacks.

Usage: python benchmarks/bench_kernels.py [--size 256] [--repeats 5]

Times every dual-backend kernel on a representative synthetic workload
(blob/border masks from the tile generator) after a warmup call, and prints
the per-call medians plus speedups. The same selection is available at
runtime through HISTOKIT_BACKEND={auto,numba,numpy}.
"""

import argparse
import time

import numpy as np

from histokit.imaging import renumber_first_encounter
from histokit.kernels import numba_impl, numpy_impl
from histokit.segmentation import SegmentationConfig, _regional_max_markers, fuse_masks
from histokit.synth import SynthTileSpec, gen_synthetic_tile


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def build_workload(size):
    cfg = SegmentationConfig(mpp=0.25)
    spec = SynthTileSpec(tile_size=size, count_range=(8, 16), seed=1)
    _, labels, blob, border = gen_synthetic_tile(spec)
    core = fuse_masks(blob, border, cfg)
    d2 = numpy_impl.squared_edt(core)
    markers = _regional_max_markers(d2, core, cfg.watershed_smoothing)
    cores = numpy_impl.watershed_flood(d2, markers, core)
    unlabeled = blob & (cores == 0)
    qr, qc = np.nonzero(unlabeled)
    sr, sc = np.nonzero(cores > 0)
    return {
        "labels": labels,
        "blob": blob,
        "border": border,
        "core": core,
        "d2": d2,
        "markers": markers,
        "cores": cores,
        "queries": (qr.astype(np.int64), qc.astype(np.int64)),
        "sites": (sr.astype(np.int64), sc.astype(np.int64), cores[sr, sc]),
        "shape": blob.shape,
    }


def bench(size, repeats):
    w = build_workload(size)
    h, width = w["shape"]
    cases = [
        ("label_components(8)", lambda impl: impl.label_components(w["blob"], 8)),
        ("plateau_components", lambda impl: impl.plateau_components(w["d2"], w["core"])),
        ("squared_edt", lambda impl: impl.squared_edt(w["core"])),
        (
            "watershed_flood",
            lambda impl: impl.watershed_flood(w["d2"], w["markers"], w["core"]),
        ),
        ("dilate_bool(3)", lambda impl: impl.dilate_bool(w["border"], 3)),
        ("boundary_mask(2)", lambda impl: impl.boundary_mask(w["labels"], 2)),
        (
            "assign_nearest",
            lambda impl: impl.assign_nearest(
                *w["queries"], *w["sites"], h, width
            ),
        ),
    ]
    print(f"tile {size}x{size}, {repeats} repeats, median seconds per call")
    print(f"{'kernel':<22}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, call in cases:
        call(numba_impl)  # jit warmup
        t_np = median_time(lambda: call(numpy_impl), repeats)
        t_nb = median_time(lambda: call(numba_impl), repeats)
        print(f"{name:<22}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>9.1f}x")
    # sanity: identical outputs on this workload
    for name, call in cases:
        a, b = call(numpy_impl), call(numba_impl)
        if name.startswith(("label_components", "plateau")):
            a, b = renumber_first_encounter(a), renumber_first_encounter(b)
        assert np.array_equal(a, b), f"backend mismatch in {name}"
    print("outputs identical across backends")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    bench(args.size, args.repeats)
