# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot geometric kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport INFINITY, fabs

cnp.import_array()

DEF MAXV = 64


cdef double _signed_area(double* xs, double* ys, int n) nogil:
    cdef double s = 0.0
    cdef int i, j
    for i in range(n):
        j = (i + 1) % n
        s += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * s


cdef void _reverse(double* xs, double* ys, int n) nogil:
    cdef int i
    cdef double t
    for i in range(n // 2):
        t = xs[i]; xs[i] = xs[n - 1 - i]; xs[n - 1 - i] = t
        t = ys[i]; ys[i] = ys[n - 1 - i]; ys[n - 1 - i] = t


cdef double _iou(double* ax, double* ay, int na, double* bx, double* by, int nb) nogil:
    cdef double sx[MAXV]
    cdef double sy[MAXV]
    cdef double tx[MAXV]
    cdef double ty[MAXV]
    cdef double cx[MAXV]
    cdef double cy[MAXV]
    cdef int i, j, n, m, nn
    cdef double area_a, area_b, inter, union_, ex, ey, px, py, qx, qy, sp, sq, t, x0, y0
    for i in range(na):
        sx[i] = ax[i]; sy[i] = ay[i]
    for i in range(nb):
        cx[i] = bx[i]; cy[i] = by[i]
    if _signed_area(sx, sy, na) < 0:
        _reverse(sx, sy, na)
    if _signed_area(cx, cy, nb) < 0:
        _reverse(cx, cy, nb)
    area_a = fabs(_signed_area(sx, sy, na))
    area_b = fabs(_signed_area(cx, cy, nb))
    if area_a <= 1e-12 or area_b <= 1e-12:
        return 0.0
    n = na
    m = nb
    for i in range(m):
        if n == 0:
            break
        x0 = cx[i]; y0 = cy[i]
        ex = cx[(i + 1) % m] - x0
        ey = cy[(i + 1) % m] - y0
        nn = 0
        for j in range(n):
            px = sx[j]; py = sy[j]
            qx = sx[(j + 1) % n]; qy = sy[(j + 1) % n]
            sp = ex * (py - y0) - ey * (px - x0)
            sq = ex * (qy - y0) - ey * (qx - x0)
            if sp >= 0:
                tx[nn] = px; ty[nn] = py; nn += 1
                if sq < 0:
                    t = sp / (sp - sq)
                    tx[nn] = px + t * (qx - px); ty[nn] = py + t * (qy - py); nn += 1
            elif sq >= 0:
                t = sp / (sp - sq)
                tx[nn] = px + t * (qx - px); ty[nn] = py + t * (qy - py); nn += 1
        n = nn
        for j in range(n):
            sx[j] = tx[j]; sy[j] = ty[j]
    inter = fabs(_signed_area(sx, sy, n)) if n >= 3 else 0.0
    union_ = area_a + area_b - inter
    if union_ <= 1e-12:
        return 0.0
    t = inter / union_
    if t > 1.0:
        t = 1.0
    if t < 0.0:
        t = 0.0
    return t


def convex_iou(a, b):
    cdef double[:, ::1] pa = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] pb = np.ascontiguousarray(b, dtype=np.float64)
    cdef int na = pa.shape[0], nb = pb.shape[0], i
    cdef double ax[MAXV]
    cdef double ay[MAXV]
    cdef double bx[MAXV]
    cdef double by[MAXV]
    if na + nb > MAXV:
        raise ValueError("polygon has too many vertices for the compiled kernel")
    for i in range(na):
        ax[i] = pa[i, 0]; ay[i] = pa[i, 1]
    for i in range(nb):
        bx[i] = pb[i, 0]; by[i] = pb[i, 1]
    return _iou(ax, ay, na, bx, by, nb)


def greedy_nms(quads, order, double threshold):
    cdef double[:, :, ::1] q = np.ascontiguousarray(quads, dtype=np.float64).reshape(-1, 4, 2)
    cdef long[::1] od = np.ascontiguousarray(order, dtype=np.int_)
    cdef int n = od.shape[0], a, b, i, k, nk = 0, v
    cdef bint ok
    cdef double ax[4]
    cdef double ay[4]
    cdef double bx[4]
    cdef double by[4]
    keep = np.empty(n, dtype=np.int_)
    cdef long[::1] kp = keep
    for a in range(n):
        i = od[a]
        for v in range(4):
            ax[v] = q[i, v, 0]; ay[v] = q[i, v, 1]
        ok = True
        for b in range(nk):
            k = kp[b]
            for v in range(4):
                bx[v] = q[k, v, 0]; by[v] = q[k, v, 1]
            if _iou(ax, ay, 4, bx, by, 4) > threshold:
                ok = False
                break
        if ok:
            kp[nk] = i
            nk += 1
    return [int(x) for x in keep[:nk]]


def open_path_dp(dist):
    cdef double[:, ::1] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef int n = d.shape[0]
    if n == 0:
        return []
    if n == 1:
        return [0]
    if n > 20:
        raise ValueError("exact path search is limited to 20 nodes")
    cdef long full = (1 << n) - 1
    cdef long size = (1 << n) * n
    cdef double* dp = <double*> malloc(size * sizeof(double))
    cdef int* parent = <int*> malloc(size * sizeof(int))
    if dp == NULL or parent == NULL:
        free(dp); free(parent)
        raise MemoryError()
    cdef long mask, nm, idx
    cdef int j, k, end, pj
    cdef double base, cand, best
    try:
        for idx in range(size):
            dp[idx] = INFINITY
            parent[idx] = -1
        for j in range(n):
            dp[(1 << j) * n + j] = 0.0
        for mask in range(1, full + 1):
            for j in range(n):
                base = dp[mask * n + j]
                if base == INFINITY or not ((mask >> j) & 1):
                    continue
                for k in range(n):
                    if (mask >> k) & 1:
                        continue
                    nm = mask | (1 << k)
                    cand = base + d[j, k]
                    if cand < dp[nm * n + k]:
                        dp[nm * n + k] = cand
                        parent[nm * n + k] = j
        best = INFINITY
        end = 0
        for j in range(n):
            if dp[full * n + j] < best:
                best = dp[full * n + j]
                end = j
        path = []
        mask = full
        j = end
        while j != -1:
            path.append(j)
            pj = parent[mask * n + j]
            mask ^= (1 << j)
            j = pj
        path.reverse()
        return path
    finally:
        free(dp)
        free(parent)
