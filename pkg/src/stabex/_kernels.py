"""Numba kernels for the overlap search.

Work is cut into units ``(rid, t, first-level choice)``; every R owns
exactly ``2^{n+1}`` units (``2^n`` with c fixed to zero), so a flat unit
index decodes without lookup tables. Workers stride over the unit range
and keep private heaps and scratch, so results depend only on the worker
count.
"""

import numpy as np
from numba import config, njit, prange

# the tbb layer shipped with some wheels is too old and only warns; skip it
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

HALF_PI = np.pi / 2
SORT_BOUND_MIN_LEN = 8
BOUND_SLACK = 1e-12


@njit(cache=True, inline="always")
def _parity(v):
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return v & 1


@njit(cache=True)
def abs_sum(a, start, length):
    s = 0.0
    for i in range(start, start + length):
        z = a[i]
        s += np.sqrt(z.real * z.real + z.imag * z.imag)
    return s


@njit(cache=True)
def rotation_bound(a, start, length, rot, ang):
    """max over independent c_x in {0..3} of |sum_x i^{c_x} a_x| by a sorted sweep."""
    m = 0
    for i in range(start, start + length):
        z = a[i]
        if abs(z.real) + abs(z.imag) < 1e-15:
            continue
        th = np.arctan2(z.imag, z.real)
        if th < 0.0:
            th += 2 * np.pi
        quad = int(th // HALF_PI)
        if quad > 3:
            quad = 3
        # multiply by (-i)^quad to land in [0, pi/2)
        if quad == 1:
            z = complex(z.imag, -z.real)
        elif quad == 2:
            z = -z
        elif quad == 3:
            z = complex(-z.imag, z.real)
        rot[m] = z
        ang[m] = th - quad * HALF_PI
        m += 1
    if m == 0:
        return 0.0
    order = np.argsort(ang[:m])
    s = 0j
    for i in range(m):
        s += rot[i]
    best = abs(s)
    step = complex(-1.0, 1.0)
    for j in range(m):
        s += rot[order[j]] * step
        v = abs(s)
        if v > best:
            best = v
    return best


@njit(cache=True)
def node_bound(a, start, length, rot, ang):
    if length >= SORT_BOUND_MIN_LEN:
        return rotation_bound(a, start, length, rot, ang)
    return abs_sum(a, start, length)


@njit(cache=True)
def _heap_push(hv, hr, ht, hq, hc, size, cap, v, r, t, q, c):
    """Insert into a min-heap keyed on value; returns the new size."""
    if size < cap:
        i = size
        size += 1
    else:
        if v <= hv[0]:
            return size
        # replace root then sift down
        i = 0
        while True:
            l = 2 * i + 1
            if l >= size:
                break
            j = l
            if l + 1 < size and hv[l + 1] < hv[l]:
                j = l + 1
            if hv[j] >= v:
                break
            hv[i] = hv[j]
            hr[i] = hr[j]
            ht[i] = ht[j]
            hq[i] = hq[j]
            hc[i] = hc[j]
            i = j
        hv[i] = v
        hr[i] = r
        ht[i] = t
        hq[i] = q
        hc[i] = c
        return size
    while i > 0:
        p = (i - 1) >> 1
        if hv[p] <= v:
            break
        hv[i] = hv[p]
        hr[i] = hr[p]
        ht[i] = ht[p]
        hq[i] = hq[p]
        hc[i] = hc[p]
        i = p
    hv[i] = v
    hr[i] = r
    ht[i] = t
    hq[i] = q
    hc[i] = c
    return size


@njit(cache=True, inline="always")
def _deposit(value, mask):
    out = 0
    b = 0
    while mask:
        low = mask & -mask
        if (value >> b) & 1:
            out |= low
        mask ^= low
        b += 1
    return out


@njit(cache=True, inline="always")
def _q_offset(k, i):
    return i * k - (i * (i - 1)) // 2


@njit(cache=True)
def _child(buf, src, dst, half, w, real):
    """Fold one variable: dst[x] = src[2x] + (-1)^{Q00 + Q0.x} i^{c0} src[2x+1]."""
    q00 = w & 1
    if real:
        c0 = 0
        q0 = w >> 1
    else:
        c0 = (w >> 1) & 1
        q0 = w >> 2
    for x in range(half):
        e = buf[src + 2 * x]
        o = buf[src + 2 * x + 1]
        if c0:
            o = complex(-o.imag, o.real)
        if (q00 ^ _parity(q0 & x)) & 1:
            buf[dst + x] = e - o
        else:
            buf[dst + x] = e + o


@njit(cache=True)
def _decode_qc(ws, k, real):
    q = 0
    c = 0
    for d in range(k):
        w = ws[d]
        if real:
            row = (w & 1) | ((w >> 1) << 1)
        else:
            row = (w & 1) | ((w >> 2) << 1)
            c |= ((w >> 1) & 1) << d
        q |= row << _q_offset(k, d)
    return q, c


@njit(cache=True)
def search_tree(buf, k, offs, ws, w0, real, floor_in, use_bound,
                hv, hr, ht, hq, hc, size, cap, rid, t, rot, ang, stats):
    """Depth-first search over (Q, c) below a fixed first-level choice ``w0``.

    ``buf[offs[d]:offs[d]+2^{k-d}]`` holds the level-d array; level 0 is
    filled by the caller. Returns the updated heap size.
    """
    floor = floor_in
    if size >= cap and hv[0] > floor:
        floor = hv[0]
    cmul = 1 if real else 2
    d = 0
    ws[0] = w0
    while True:
        length = 1 << (k - d)
        half = length >> 1
        ncombo = half * 2 * cmul
        if d == 0:
            if ws[0] > w0:
                break
        elif ws[d] >= ncombo:
            d -= 1
            ws[d] += 1
            continue
        w = ws[d]
        src = offs[d]
        if half == 1:
            # leaf level: the choice w fixes the last row of Q and c_{k-1}
            e = buf[src]
            o = buf[src + 1]
            if not real and ((w >> 1) & 1):
                o = complex(-o.imag, o.real)
            z = e - o if (w & 1) else e + o
            v = abs(z)
            stats[0] += 1
            if v > floor:
                q, c = _decode_qc(ws, k, real)
                size = _heap_push(hv, hr, ht, hq, hc, size, cap, v, rid, t, q, c)
                if size >= cap and hv[0] > floor:
                    floor = hv[0]
            if d == 0:
                break
            ws[d] += 1
            continue
        dst = offs[d + 1]
        _child(buf, src, dst, half, w, real)
        stats[1] += 1
        if use_bound:
            bnd = node_bound(buf, dst, half, rot, ang)
            if bnd * (1.0 + BOUND_SLACK) + 1e-15 <= floor:
                stats[2] += 1
                if d == 0:
                    break
                ws[d] += 1
                continue
        d += 1
        ws[d] = 0
    return size


@njit(cache=True)
def _fill_level0(buf, b, cols, k, t, scale):
    buf[0] = b[t].conjugate() * scale
    idx_prev = np.empty(1 << k, dtype=np.int64)
    idx_prev[0] = t
    for j in range(k):
        h = 1 << j
        cj = cols[j]
        for x in range(h):
            ix = idx_prev[x] ^ cj
            idx_prev[h + x] = ix
            buf[h + x] = b[ix].conjugate() * scale


@njit(cache=True)
def scan_worker(wid, nworkers, b, n, ks, cols, nonpivot, real, threshold, use_bound,
                hv, hr, ht, hq, hc, cap, stats):
    """Process units wid, wid+nworkers, ... ; returns the final heap size."""
    nR = ks.shape[0]
    ubits = n if real else n + 1
    total = nR << ubits
    nworkers = np.int64(nworkers)
    buf = np.empty(2 << n, dtype=np.complex128)
    rot = np.empty(1 << n, dtype=np.complex128)
    ang = np.empty(1 << n, dtype=np.float64)
    ws = np.zeros(n + 1, dtype=np.int64)
    offs = np.zeros(n + 2, dtype=np.int64)
    size = 0
    last_rid = -1
    last_t = -1
    k = 0
    u = np.int64(wid)  # prange indices arrive unsigned
    while u < total:
        rid = u >> ubits
        rem = u & ((1 << ubits) - 1)
        k = ks[rid]
        cbits = k if real else k + 1
        tidx = rem >> cbits
        w0 = rem & ((1 << cbits) - 1)
        t = _deposit(tidx, nonpivot[rid])
        if rid != last_rid or t != last_t:
            for d in range(k + 1):
                offs[d + 1] = offs[d] + (1 << (k - d))
            _fill_level0(buf, b, cols[rid], k, t, 2.0 ** (-0.5 * k))
            last_rid = rid
            last_t = t
            if use_bound:
                floor = threshold
                if size >= cap and hv[0] > floor:
                    floor = hv[0]
                if abs_sum(buf, 0, 1 << k) * (1.0 + BOUND_SLACK) + 1e-15 <= floor:
                    # whole branch dominated; skip its remaining units
                    stats[3] += 1
                    nxt = (rid << ubits) + ((tidx + 1) << cbits)
                    u += ((nxt - u + nworkers - 1) // nworkers) * nworkers
                    continue
        size = search_tree(buf, k, offs, ws, w0, real, threshold, use_bound,
                           hv, hr, ht, hq, hc, size, cap, rid, t, rot, ang, stats)
        u += nworkers
    return size


@njit(cache=True, parallel=True)
def scan_parallel(b, n, ks, cols, nonpivot, real, threshold, use_bound, cap, nworkers):
    hv = np.zeros((nworkers, cap), dtype=np.float64)
    hr = np.zeros((nworkers, cap), dtype=np.int64)
    ht = np.zeros((nworkers, cap), dtype=np.int64)
    hq = np.zeros((nworkers, cap), dtype=np.int64)
    hc = np.zeros((nworkers, cap), dtype=np.int64)
    sizes = np.zeros(nworkers, dtype=np.int64)
    stats = np.zeros((nworkers, 4), dtype=np.int64)
    for w in prange(nworkers):
        sizes[w] = scan_worker(w, nworkers, b, n, ks, cols, nonpivot, real, threshold, use_bound,
                               hv[w], hr[w], ht[w], hq[w], hc[w], cap, stats[w])
    return hv, hr, ht, hq, hc, sizes, stats


@njit(cache=True)
def scan_serial(b, n, ks, cols, nonpivot, real, threshold, use_bound, cap):
    hv = np.zeros((1, cap), dtype=np.float64)
    hr = np.zeros((1, cap), dtype=np.int64)
    ht = np.zeros((1, cap), dtype=np.int64)
    hq = np.zeros((1, cap), dtype=np.int64)
    hc = np.zeros((1, cap), dtype=np.int64)
    sizes = np.zeros(1, dtype=np.int64)
    stats = np.zeros((1, 4), dtype=np.int64)
    sizes[0] = scan_worker(0, 1, b, n, ks, cols, nonpivot, real, threshold, use_bound,
                           hv[0], hr[0], ht[0], hq[0], hc[0], cap, stats[0])
    return hv, hr, ht, hq, hc, sizes, stats


@njit(cache=True)
def max_over_qc_kernel(p, k, real, floor, use_bound, cap):
    """Exhaustive/pruned search over all (Q, c) for a single P array of length 2^k."""
    buf = np.empty(2 << k, dtype=np.complex128)
    offs = np.zeros(k + 2, dtype=np.int64)
    for d in range(k + 1):
        offs[d + 1] = offs[d] + (1 << (k - d))
    rot = np.empty(max(1, 1 << k), dtype=np.complex128)
    ang = np.empty(max(1, 1 << k), dtype=np.float64)
    ws = np.zeros(k + 1, dtype=np.int64)
    hv = np.zeros(cap, dtype=np.float64)
    hr = np.zeros(cap, dtype=np.int64)
    ht = np.zeros(cap, dtype=np.int64)
    hq = np.zeros(cap, dtype=np.int64)
    hc = np.zeros(cap, dtype=np.int64)
    stats = np.zeros(4, dtype=np.int64)
    size = 0
    cbits = k if real else k + 1
    for w0 in range(1 << cbits):
        for i in range(1 << k):
            buf[i] = p[i]
        size = search_tree(buf, k, offs, ws, w0, real, floor, use_bound,
                           hv, hr, ht, hq, hc, size, cap, 0, 0, rot, ang, stats)
    return hv[:size], hq[:size], hc[:size], stats


@njit(cache=True)
def form_overlaps(b, n, ks, cols, ts, qs, cs):
    """Exact <phi|b> for each form given by (k, R columns, t, Q bits, c bits)."""
    m = ks.shape[0]
    out = np.empty(m, dtype=np.complex128)
    for f in range(m):
        k = ks[f]
        t = ts[f]
        if k == 0:
            out[f] = b[t]
            continue
        q = qs[f]
        c = cs[f]
        acc = 0j
        for x in range(1 << k):
            idx = t
            quad = 0
            for i in range(k):
                if (x >> i) & 1:
                    idx ^= cols[f, i]
                    row = (q >> _q_offset(k, i)) & ((1 << (k - i)) - 1)
                    quad ^= _parity(row & (x >> i))
            lin = 0
            cx = c & x
            while cx:
                lin += 1
                cx &= cx - 1
            lin &= 3
            z = b[idx]
            if lin == 1:
                z = complex(z.imag, -z.real)
            elif lin == 2:
                z = -z
            elif lin == 3:
                z = complex(-z.imag, z.real)
            if quad:
                z = -z
            acc += z
        out[f] = acc * 2.0 ** (-0.5 * k)
    return out


@njit(cache=True)
def synthesize_columns(n, ks, cols, ts, qs, cs):
    m = ks.shape[0]
    out = np.zeros((1 << n, m), dtype=np.complex128)
    for f in range(m):
        k = ks[f]
        t = ts[f]
        if k == 0:
            out[t, f] = 1.0
            continue
        q = qs[f]
        c = cs[f]
        scale = 2.0 ** (-0.5 * k)
        for x in range(1 << k):
            idx = t
            quad = 0
            for i in range(k):
                if (x >> i) & 1:
                    idx ^= cols[f, i]
                    row = (q >> _q_offset(k, i)) & ((1 << (k - i)) - 1)
                    quad ^= _parity(row & (x >> i))
            lin = 0
            cx = c & x
            while cx:
                lin += 1
                cx &= cx - 1
            lin &= 3
            z = complex(scale, 0.0)
            if lin == 1:
                z = complex(0.0, scale)
            elif lin == 2:
                z = complex(-scale, 0.0)
            elif lin == 3:
                z = complex(0.0, -scale)
            if quad:
                z = -z
            out[idx, f] = z
    return out
