"""Shared fixture builders for the test suite."""

import numpy as np


def random_labeled_mask(rng, height, width, max_instances):
    """Random elliptical instances painted in order (later wins contested
    pixels); painted-over ids may vanish, which the metrics must tolerate."""
    labels = np.zeros((height, width), dtype=np.int32)
    n = int(rng.integers(1, max_instances + 1))
    for idx in range(1, n + 1):
        cy = rng.uniform(0, height)
        cx = rng.uniform(0, width)
        ry = rng.uniform(2, max(3, height / 6))
        rx = rng.uniform(2, max(3, width / 6))
        y0, y1 = int(max(0, cy - ry - 1)), int(min(height, cy + ry + 2))
        x0, x1 = int(max(0, cx - rx - 1)), int(min(width, cx + rx + 2))
        if y0 >= y1 or x0 >= x1:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1]
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        labels[y0:y1, x0:x1][inside] = idx
    return labels


def random_binary_mask(rng, height, width, density=None):
    if density is None:
        density = rng.uniform(0.2, 0.7)
    return rng.random((height, width)) < density


def brute_force_nearest(labels, at):
    """Exhaustive (d2, row, col, id) scan oracle for nearest_nonzero."""
    best = None
    h, w = labels.shape
    for r in range(h):
        for c in range(w):
            if labels[r, c] == 0:
                continue
            d2 = (r - at[0]) ** 2 + (c - at[1]) ** 2
            key = (d2, r, c, int(labels[r, c]))
            if best is None or key < best:
                best = key
    if best is None:
        raise ValueError("no nonzero pixel")
    return best[3]


def flood_fill_component_count(mask, connectivity):
    """Independent BFS flood-fill component counter."""
    from collections import deque

    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    count = 0
    for i in range(h):
        for j in range(w):
            if mask[i, j] and not seen[i, j]:
                count += 1
                queue = deque([(i, j)])
                seen[i, j] = True
                while queue:
                    r, c = queue.popleft()
                    for dr, dc in offsets:
                        nr, nc = r + dr, c + dc
                        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            queue.append((nr, nc))
    return count
