"""Numba-jitted raster kernels (the default backend).

Each kernel must agree bit-for-bit with its twin in ``numpy_impl``; the
labelers may return different provisional ids (callers renumber) but must
induce the same partition.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _uf_find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


@njit(cache=True)
def _uf_union(parent, a, b):
    ra = _uf_find(parent, a)
    rb = _uf_find(parent, b)
    if ra != rb:
        if rb < ra:
            ra, rb = rb, ra
        parent[rb] = ra


@njit(cache=True)
def label_components(mask, connectivity=8):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = np.empty(h * w + 2, dtype=np.int32)
    nxt = 0
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            best = -1
            # already-visited neighbors: W, NW, N, NE (N only for 4-conn)
            if c > 0 and mask[r, c - 1]:
                best = _uf_find(parent, labels[r, c - 1] - 1)
            if r > 0:
                lo = c - 1 if connectivity == 8 else c
                hi = c + 1 if connectivity == 8 else c
                for cc in range(max(0, lo), min(w - 1, hi) + 1):
                    if mask[r - 1, cc]:
                        root = _uf_find(parent, labels[r - 1, cc] - 1)
                        if best == -1:
                            best = root
                        elif root != best:
                            _uf_union(parent, best, root)
                            best = _uf_find(parent, best)
            if best == -1:
                parent[nxt] = nxt
                best = nxt
                nxt += 1
            labels[r, c] = best + 1
    for r in range(h):
        for c in range(w):
            if labels[r, c] != 0:
                labels[r, c] = _uf_find(parent, labels[r, c] - 1) + 1
    return labels


@njit(cache=True)
def plateau_components(values, mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = np.empty(h * w + 2, dtype=np.int32)
    nxt = 0
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            v = values[r, c]
            best = -1
            if c > 0 and mask[r, c - 1] and values[r, c - 1] == v:
                best = _uf_find(parent, labels[r, c - 1] - 1)
            if r > 0:
                for cc in range(max(0, c - 1), min(w - 1, c + 1) + 1):
                    if mask[r - 1, cc] and values[r - 1, cc] == v:
                        root = _uf_find(parent, labels[r - 1, cc] - 1)
                        if best == -1:
                            best = root
                        elif root != best:
                            _uf_union(parent, best, root)
                            best = _uf_find(parent, best)
            if best == -1:
                parent[nxt] = nxt
                best = nxt
                nxt += 1
            labels[r, c] = best + 1
    for r in range(h):
        for c in range(w):
            if labels[r, c] != 0:
                labels[r, c] = _uf_find(parent, labels[r, c] - 1) + 1
    return labels


@njit(cache=True)
def squared_edt(mask):
    h, w = mask.shape
    inf = np.int64(h) * h + np.int64(w) * w + 1
    g = np.empty((h, w), dtype=np.int64)
    for c in range(w):
        g[0, c] = inf if mask[0, c] else 0
    for r in range(1, h):
        for c in range(w):
            if mask[r, c]:
                g[r, c] = min(g[r - 1, c] + 1, inf)
            else:
                g[r, c] = 0
    for r in range(h - 2, -1, -1):
        for c in range(w):
            if g[r + 1, c] + 1 < g[r, c]:
                g[r, c] = g[r + 1, c] + 1
    out = np.empty((h, w), dtype=np.int64)
    v = np.empty(w, dtype=np.int64)
    z = np.empty(w + 1, dtype=np.float64)
    for r in range(h):
        for c in range(w):
            gg = g[r, c] * g[r, c]
            g[r, c] = gg if gg < inf else inf
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, w):
            s = ((g[r, q] + q * q) - (g[r, v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            while s <= z[k]:
                k -= 1
                s = ((g[r, q] + q * q) - (g[r, v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            d = np.int64(q - v[k])
            dd = d * d + g[r, v[k]]
            out[r, q] = dd if dd < inf else inf
    return out


@njit(cache=True)
def _heap_push(keys1, keys2, pix, size, k1, k2, p):
    i = size
    keys1[i] = k1
    keys2[i] = k2
    pix[i] = p
    while i > 0:
        up = (i - 1) // 2
        if keys1[up] > keys1[i] or (keys1[up] == keys1[i] and keys2[up] > keys2[i]):
            keys1[up], keys1[i] = keys1[i], keys1[up]
            keys2[up], keys2[i] = keys2[i], keys2[up]
            pix[up], pix[i] = pix[i], pix[up]
            i = up
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(keys1, keys2, pix, size):
    top = pix[0]
    size -= 1
    keys1[0] = keys1[size]
    keys2[0] = keys2[size]
    pix[0] = pix[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < size and (
            keys1[left] < keys1[smallest]
            or (keys1[left] == keys1[smallest] and keys2[left] < keys2[smallest])
        ):
            smallest = left
        if right < size and (
            keys1[right] < keys1[smallest]
            or (keys1[right] == keys1[smallest] and keys2[right] < keys2[smallest])
        ):
            smallest = right
        if smallest == i:
            break
        keys1[i], keys1[smallest] = keys1[smallest], keys1[i]
        keys2[i], keys2[smallest] = keys2[smallest], keys2[i]
        pix[i], pix[smallest] = pix[smallest], pix[i]
        i = smallest
    return top, size


@njit(cache=True)
def watershed_flood(priority, markers, mask):
    h, w = mask.shape
    n = h * w
    labels = np.zeros((h, w), dtype=np.int32)
    keys1 = np.empty(n, dtype=np.int64)
    keys2 = np.empty(n, dtype=np.int64)
    pix = np.empty(n, dtype=np.int64)
    size = 0
    counter = 0
    for r in range(h):
        for c in range(w):
            if markers[r, c] != 0:
                labels[r, c] = markers[r, c]
                size = _heap_push(
                    keys1, keys2, pix, size, -priority[r, c], counter, np.int64(r) * w + c
                )
                counter += 1
    while size > 0:
        p, size = _heap_pop(keys1, keys2, pix, size)
        r = p // w
        c = p % w
        lab = labels[r, c]
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                nr = r + dr
                nc = c + dc
                if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and labels[nr, nc] == 0:
                    labels[nr, nc] = lab
                    size = _heap_push(
                        keys1, keys2, pix, size, -priority[nr, nc], counter, nr * w + nc
                    )
                    counter += 1
    return labels


@njit(cache=True)
def dilate_bool(mask, kernel_size):
    # square-kernel dilation is separable: rows pass then columns pass
    h, w = mask.shape
    r = (kernel_size - 1) // 2
    rows = np.zeros((h, w), dtype=np.bool_)
    for i in range(h):
        for j in range(w):
            hit = False
            for dj in range(max(0, j - r), min(w - 1, j + r) + 1):
                if mask[i, dj]:
                    hit = True
                    break
            rows[i, j] = hit
    out = np.zeros((h, w), dtype=np.bool_)
    for i in range(h):
        for j in range(w):
            hit = False
            for di in range(max(0, i - r), min(h - 1, i + r) + 1):
                if rows[di, j]:
                    hit = True
                    break
            out[i, j] = hit
    return out


@njit(cache=True)
def boundary_mask(labels, thickness):
    h, w = labels.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for i in range(h):
        for j in range(w):
            lab = labels[i, j]
            if lab == 0:
                continue
            found = False
            for di in range(max(0, i - thickness), min(h - 1, i + thickness) + 1):
                for dj in range(max(0, j - thickness), min(w - 1, j + thickness) + 1):
                    if labels[di, dj] != lab:
                        found = True
                        break
                if found:
                    break
            out[i, j] = found
    return out


@njit(cache=True)
def assign_nearest(query_rows, query_cols, site_rows, site_cols, site_ids, height, width):
    out = np.empty(query_rows.size, dtype=np.int32)
    for qi in range(query_rows.size):
        qr = np.int64(query_rows[qi])
        qc = np.int64(query_cols[qi])
        best_d2 = np.int64(-1)
        best_r = np.int64(0)
        best_c = np.int64(0)
        best_id = np.int32(0)
        for si in range(site_rows.size):
            dr = qr - site_rows[si]
            dc = qc - site_cols[si]
            d2 = dr * dr + dc * dc
            if (
                best_d2 < 0
                or d2 < best_d2
                or (
                    d2 == best_d2
                    and (
                        site_rows[si] < best_r
                        or (site_rows[si] == best_r and site_cols[si] < best_c)
                    )
                )
            ):
                best_d2 = d2
                best_r = site_rows[si]
                best_c = site_cols[si]
                best_id = site_ids[si]
        out[qi] = best_id
    return out
