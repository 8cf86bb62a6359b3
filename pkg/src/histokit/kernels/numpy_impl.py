"""Pure numpy/python implementations of the hot raster kernels.

These mirror the numba kernels in ``numba_impl`` exactly: every function here
must produce bit-identical output for the same input, which the test suite
enforces. The component/plateau labelers return provisional (non-contiguous)
ids; callers renumber to first-encounter order.
"""

import heapq

import numpy as np

# Neighbor offsets in the order every backend must visit them.
OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _row_runs(mask):
    """Decompose a bool image into row-major runs of foreground.

    Returns (rows, c0, c1) with inclusive column bounds, in row-major order.
    """
    padded = np.zeros((mask.shape[0], mask.shape[1] + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    starts = np.argwhere(d == 1)
    ends = np.argwhere(d == -1)
    return starts[:, 0], starts[:, 1], ends[:, 1] - 1


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _paint_runs(shape, rows, c0, c1, run_ids):
    lengths = (c1 - c0 + 1).astype(np.int64)
    if lengths.size == 0:
        return np.zeros(shape, dtype=np.int32)
    total = int(lengths.sum())
    offsets = np.arange(total, dtype=np.int64) - np.repeat(
        np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths
    )
    flat = (rows.astype(np.int64) * shape[1] + c0.astype(np.int64)).repeat(lengths) + offsets
    out = np.zeros(shape[0] * shape[1], dtype=np.int32)
    out[flat] = np.asarray(run_ids, dtype=np.int32).repeat(lengths)
    return out.reshape(shape)


def label_components(mask, connectivity=8):
    """Provisional connected-component labels of a bool mask (run merging)."""
    mask = np.ascontiguousarray(mask, dtype=bool)
    rows, c0, c1 = _row_runs(mask)
    n = rows.size
    if n == 0:
        return np.zeros(mask.shape, dtype=np.int32)
    uf = _UnionFind(n)
    slack = 1 if connectivity == 8 else 0
    row_start = np.searchsorted(rows, np.arange(mask.shape[0] + 1))
    for r in range(1, mask.shape[0]):
        _sweep_rows(uf, c0, c1, row_start[r - 1], row_start[r], row_start[r + 1], slack, None, r)
    run_ids = np.array([uf.find(k) + 1 for k in range(n)], dtype=np.int32)
    return _paint_runs(mask.shape, rows, c0, c1, run_ids)


def _sweep_rows(uf, c0, c1, i0, i_end, j_end, slack, values, r):
    """Union every overlapping run pair between two adjacent rows.

    Runs [i0, i_end) belong to row r-1 and [i_end, j_end) to row r; when
    ``values`` is given, runs additionally must hold equal values to merge.
    """
    j = i_end
    for i in range(i0, i_end):
        while j < j_end and c1[j] < c0[i] - slack:
            j += 1
        jj = j
        while jj < j_end and c0[jj] <= c1[i] + slack:
            if values is None or values[r - 1, c0[i]] == values[r, c0[jj]]:
                uf.union(i, jj)
            jj += 1


def plateau_components(values, mask):
    """Provisional labels of equal-valued 8-connected plateaus inside mask."""
    mask = np.ascontiguousarray(mask, dtype=bool)
    values = np.ascontiguousarray(values)
    h, w = mask.shape
    # split foreground runs further wherever the value changes
    rows_l, c0_l, c1_l = _row_runs(mask)
    rows, c0, c1 = [], [], []
    for r, a, b in zip(rows_l, c0_l, c1_l):
        v = values[r, a : b + 1]
        cuts = np.flatnonzero(v[1:] != v[:-1]) + a + 1
        bounds = np.concatenate(([a], cuts, [b + 1]))
        for k in range(bounds.size - 1):
            rows.append(r)
            c0.append(bounds[k])
            c1.append(bounds[k + 1] - 1)
    rows = np.asarray(rows, dtype=np.int64)
    c0 = np.asarray(c0, dtype=np.int64)
    c1 = np.asarray(c1, dtype=np.int64)
    n = rows.size
    if n == 0:
        return np.zeros(mask.shape, dtype=np.int32)
    uf = _UnionFind(n)
    row_start = np.searchsorted(rows, np.arange(h + 1))
    for r in range(1, h):
        _sweep_rows(uf, c0, c1, row_start[r - 1], row_start[r], row_start[r + 1], 1, values, r)
    run_ids = np.array([uf.find(k) + 1 for k in range(n)], dtype=np.int32)
    return _paint_runs(mask.shape, rows, c0, c1, run_ids)


def squared_edt(mask):
    """Exact squared Euclidean distance to the nearest background pixel.

    Foreground with no background anywhere gets the sentinel h*h + w*w + 1.
    Two-pass separable lower-envelope transform; all arithmetic on int64.
    """
    mask = np.ascontiguousarray(mask, dtype=bool)
    h, w = mask.shape
    inf = np.int64(h) * h + np.int64(w) * w + 1
    # vertical pass: distance (in rows) to nearest background in the column
    g = np.empty((h, w), dtype=np.int64)
    g[0] = np.where(mask[0], inf, 0)
    for i in range(1, h):
        g[i] = np.where(mask[i], np.minimum(g[i - 1] + 1, inf), 0)
    for i in range(h - 2, -1, -1):
        g[i] = np.minimum(g[i], g[i + 1] + 1)
    f = np.minimum(g * g, inf)
    # horizontal pass: 1-d squared-distance envelope per row
    out = np.empty((h, w), dtype=np.int64)
    v = np.empty(w, dtype=np.int64)
    z = np.empty(w + 1, dtype=np.float64)
    for i in range(h):
        fi = f[i]
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, w):
            s = ((fi[q] + q * q) - (fi[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            while s <= z[k]:
                k -= 1
                s = ((fi[q] + q * q) - (fi[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            d = np.int64(q - v[k])
            out[i, q] = min(d * d + fi[v[k]], inf)
    return out


def watershed_flood(priority, markers, mask):
    """Flood mask from markers, visiting pixels in decreasing priority.

    Pop order is (smallest -priority, then insertion order); a pixel is
    labeled the moment a front first reaches it. Matches the numba kernel
    operation for operation.
    """
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    heap = []
    counter = 0
    mrow, mcol = np.nonzero(markers)
    for r, c in zip(mrow, mcol):
        labels[r, c] = markers[r, c]
        heapq.heappush(heap, (-int(priority[r, c]), counter, int(r), int(c)))
        counter += 1
    while heap:
        _, _, r, c = heapq.heappop(heap)
        lab = labels[r, c]
        for dr, dc in OFFSETS_8:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and labels[nr, nc] == 0:
                labels[nr, nc] = lab
                heapq.heappush(heap, (-int(priority[nr, nc]), counter, nr, nc))
                counter += 1
    return labels


def dilate_bool(mask, kernel_size):
    """Binary dilation by an odd square kernel; windows clamp at the edges."""
    r = (kernel_size - 1) // 2
    if r == 0:
        return mask.copy()
    h, w = mask.shape
    out = np.zeros((h, w), dtype=bool)
    for dr in range(-r, r + 1):
        sr0, sr1 = max(0, -dr), min(h, h - dr)
        tr0 = max(0, dr)
        for dc in range(-r, r + 1):
            sc0, sc1 = max(0, -dc), min(w, w - dc)
            tc0 = max(0, dc)
            out[tr0 : tr0 + (sr1 - sr0), tc0 : tc0 + (sc1 - sc0)] |= mask[sr0:sr1, sc0:sc1]
    return out


def boundary_mask(labels, thickness):
    """Foreground pixels with a differently-labeled pixel within Chebyshev
    distance ``thickness``. Out-of-image neighbors do not count."""
    h, w = labels.shape
    fg = labels > 0
    out = np.zeros((h, w), dtype=bool)
    for dr in range(-thickness, thickness + 1):
        sr0, sr1 = max(0, -dr), min(h, h - dr)
        tr0 = max(0, dr)
        for dc in range(-thickness, thickness + 1):
            if dr == 0 and dc == 0:
                continue
            sc0, sc1 = max(0, -dc), min(w, w - dc)
            tc0 = max(0, dc)
            tgt = (slice(tr0, tr0 + (sr1 - sr0)), slice(tc0, tc0 + (sc1 - sc0)))
            src = (slice(sr0, sr1), slice(sc0, sc1))
            out[tgt] |= labels[tgt] != labels[src]
    out &= fg
    return out


def assign_nearest(query_rows, query_cols, site_rows, site_cols, site_ids, height, width):
    """For each query pixel, the id of the site minimizing (d2, row, col).

    Sites must be passed in row-major order; the (d2, row, col) key is unique
    per site, so argmin over the encoded key realizes the tie-break exactly.
    """
    hw = np.int64(height) * np.int64(width)
    site_key = site_rows.astype(np.int64) * width + site_cols.astype(np.int64)
    out = np.empty(query_rows.size, dtype=np.int32)
    chunk = max(1, int(2_000_000 // max(1, site_rows.size)))
    for start in range(0, query_rows.size, chunk):
        qr = query_rows[start : start + chunk].astype(np.int64)[:, None]
        qc = query_cols[start : start + chunk].astype(np.int64)[:, None]
        d2 = (qr - site_rows[None, :]) ** 2 + (qc - site_cols[None, :]) ** 2
        best = np.argmin(d2 * hw + site_key[None, :], axis=1)
        out[start : start + chunk] = site_ids[best]
    return out
