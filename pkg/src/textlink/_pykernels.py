"""Pure-Python implementations of the hot geometric kernels.

These mirror ``_ckernels.pyx`` operation for operation (same loop order,
same tie-breaking) so both backends return identical results.
"""
import math

import numpy as np

_EPS = 1e-12


def _signed_area(pts):
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _ccw(pts):
    pts = [(float(p[0]), float(p[1])) for p in pts]
    if _signed_area(pts) < 0:
        pts.reverse()
    return pts


def clip_convex(subject, clip):
    """Sutherland-Hodgman clip of ``subject`` by the convex polygon ``clip``."""
    out = _ccw(subject)
    clip = _ccw(clip)
    m = len(clip)
    for i in range(m):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % m]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        n = len(inp)
        for j in range(n):
            px, py = inp[j]
            qx, qy = inp[(j + 1) % n]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sp >= 0:
                out.append((px, py))
                if sq < 0:
                    t = sp / (sp - sq)
                    out.append((px + t * (qx - px), py + t * (qy - py)))
            elif sq >= 0:
                t = sp / (sp - sq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def convex_iou(a, b):
    area_a = abs(_signed_area(_ccw(a)))
    area_b = abs(_signed_area(_ccw(b)))
    if area_a <= _EPS or area_b <= _EPS:
        return 0.0
    inter = clip_convex(a, b)
    inter_area = abs(_signed_area(inter)) if len(inter) >= 3 else 0.0
    union = area_a + area_b - inter_area
    if union <= _EPS:
        return 0.0
    return min(1.0, max(0.0, inter_area / union))


def greedy_nms(quads, order, threshold):
    """Keep boxes in ``order`` unless IoU with an already-kept box exceeds ``threshold``."""
    quads = np.asarray(quads, dtype=np.float64)
    keep = []
    for i in order:
        i = int(i)
        ok = True
        for k in keep:
            if convex_iou(quads[i], quads[k]) > threshold:
                ok = False
                break
        if ok:
            keep.append(i)
    return keep


def open_path_dp(dist):
    """Exact shortest open Hamiltonian path (Held-Karp); returns the visiting order."""
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    if n == 0:
        return []
    if n == 1:
        return [0]
    full = (1 << n) - 1
    dp = [[math.inf] * n for _ in range(1 << n)]
    parent = [[-1] * n for _ in range(1 << n)]
    rows = d.tolist()
    for j in range(n):
        dp[1 << j][j] = 0.0
    for mask in range(1, full + 1):
        cur = dp[mask]
        for j in range(n):
            base = cur[j]
            if base == math.inf or not (mask >> j) & 1:
                continue
            dj = rows[j]
            for k in range(n):
                if (mask >> k) & 1:
                    continue
                nm = mask | (1 << k)
                cand = base + dj[k]
                if cand < dp[nm][k]:
                    dp[nm][k] = cand
                    parent[nm][k] = j
    best = math.inf
    end = 0
    for j in range(n):
        if dp[full][j] < best:
            best = dp[full][j]
            end = j
    path = []
    mask = full
    j = end
    while j != -1:
        path.append(j)
        pj = parent[mask][j]
        mask ^= 1 << j
        j = pj
    path.reverse()
    return path
