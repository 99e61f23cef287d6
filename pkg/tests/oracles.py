"""Independent reference implementations used to cross-check the package.

Each oracle is written from scratch with the simplest algorithm that is
obviously correct, and shares no code with ``textlink``.
"""
import itertools
import math

import numpy as np


# --- polygon area and convex clipping --------------------------------------

def shoelace(pts):
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _side(p, a, b):
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def _inside(p, a, b):
    return _side(p, a, b) >= 0


def _cut(p, q, a, b):
    # only called when p and q straddle the line, so the signed distances differ
    dp, dq = _side(p, a, b), _side(q, a, b)
    t = dp / (dp - dq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def clip(subject, clipper):
    """Sutherland-Hodgman; both polygons convex and counter-clockwise."""
    out = [tuple(p) for p in subject]
    for i in range(len(clipper)):
        a, b = clipper[i], clipper[(i + 1) % len(clipper)]
        inp, out = out, []
        for j in range(len(inp)):
            p, q = inp[j - 1], inp[j]
            if _inside(q, a, b):
                if not _inside(p, a, b):
                    out.append(_cut(p, q, a, b))
                out.append(q)
            elif _inside(p, a, b):
                out.append(_cut(p, q, a, b))
        if not out:
            break
    return out


def ccw(pts):
    pts = [tuple(map(float, p)) for p in pts]
    return pts if shoelace(pts) >= 0 else pts[::-1]


def convex_iou(a, b):
    a, b = ccw(a), ccw(b)
    inter = clip(a, b)
    ia = abs(shoelace(inter)) if len(inter) >= 3 else 0.0
    ua = abs(shoelace(a)) + abs(shoelace(b)) - ia
    return ia / ua if ua > 0 else 0.0


def rect_corners(x, y, h, w, theta):
    """Corners from an explicit rotation matrix (image y down, angle upward-positive)."""
    rot = np.array([[math.cos(theta), math.sin(theta)], [-math.sin(theta), math.cos(theta)]])
    local = np.array([[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]])
    return local @ rot.T + np.array([x, y])


# --- greedy NMS -------------------------------------------------------------

def brute_nms(quads, scores, thr):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    alive = set(order)
    keep = []
    for i in order:
        if i not in alive:
            continue
        keep.append(i)
        for j in order:
            if j != i and j in alive and j not in keep and convex_iou(quads[i], quads[j]) > thr:
                alive.discard(j)
    return sorted(keep)


# --- clustering --------------------------------------------------------------

class DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1

    def partition(self):
        groups = {}
        for i in range(len(self.parent)):
            groups.setdefault(self.find(i), []).append(i)
        return sorted(sorted(g) for g in groups.values())


def union_find_partition(n, weighted_edges, thr):
    ds = DisjointSet(n)
    for (i, j), p in weighted_edges.items():
        if p >= thr:
            ds.union(i, j)
    return ds.partition()


# --- open paths ----------------------------------------------------------------

def brute_min_path_length(pts):
    pts = np.asarray(pts, float)
    best = math.inf
    for perm in itertools.permutations(range(len(pts))):
        if perm[0] > perm[-1]:
            continue
        best = min(best, sum(math.dist(pts[perm[k]], pts[perm[k + 1]])
                             for k in range(len(perm) - 1)))
    return best


def dp_min_path_length(pts):
    """Held-Karp over (subset, end) written with dictionaries."""
    pts = np.asarray(pts, float)
    n = len(pts)
    if n <= 1:
        return 0.0
    d = [[math.dist(pts[i], pts[j]) for j in range(n)] for i in range(n)]
    best = {(1 << i, i): 0.0 for i in range(n)}
    for size in range(2, n + 1):
        for subset in itertools.combinations(range(n), size):
            mask = sum(1 << k for k in subset)
            for end in subset:
                prev = mask ^ (1 << end)
                best[(mask, end)] = min(best[(prev, k)] + d[k][end] for k in subset if k != end)
    full = (1 << n) - 1
    return min(best[(full, e)] for e in range(n))


def path_len(pts, order):
    pts = np.asarray(pts, float)
    return sum(math.dist(pts[order[k]], pts[order[k + 1]]) for k in range(len(order) - 1))


# --- rectangles -------------------------------------------------------------

def sweep_min_rect_area(pts, step_deg=0.1):
    pts = np.asarray(pts, float)
    best = math.inf
    for k in range(int(round(90 / step_deg))):
        a = math.radians(k * step_deg)
        u = np.array([math.cos(a), math.sin(a)])
        v = np.array([-u[1], u[0]])
        pu, pv = pts @ u, pts @ v
        best = min(best, (pu.max() - pu.min()) * (pv.max() - pv.min()))
    return best


# --- matching --------------------------------------------------------------

def exhaustive_match_count(ious, thr):
    """Largest number of one-to-one pairs with IoU >= thr (tiny inputs only)."""
    n_p, n_g = ious.shape
    best = 0
    for k in range(min(n_p, n_g), 0, -1):
        for ps in itertools.combinations(range(n_p), k):
            for gs in itertools.permutations(range(n_g), k):
                if all(ious[p, g] >= thr for p, g in zip(ps, gs)):
                    return k
    return best


def greedy_match_count(ious, thr):
    pairs = sorted(((ious[i, j], i, j) for i in range(ious.shape[0])
                    for j in range(ious.shape[1]) if ious[i, j] >= thr),
                   key=lambda t: (-t[0], t[1], t[2]))
    up, ug, n = set(), set(), 0
    for _, i, j in pairs:
        if i not in up and j not in ug:
            up.add(i)
            ug.add(j)
            n += 1
    return n


# --- local graphs -------------------------------------------------------------

def knn(xy, i, k):
    d = [(math.dist(xy[i], xy[j]), j) for j in range(len(xy)) if j != i]
    d.sort()
    return [j for _, j in d[:k]]


def hop_nodes(xy, pivot, k1=8, k2=4):
    one = knn(xy, pivot, k1)
    two = []
    for q in one:
        for r in knn(xy, q, k2):
            if r != pivot and r not in one and r not in two:
                two.append(r)
    return one, two


def sequential_pivot_filter(xy, ids, xi=0.75):
    """Kept pivot indices per instance using plain frozensets."""
    kept = {}
    for i in range(len(xy)):
        inst = ids[i]
        s = frozenset(knn(xy, i, 8))
        prior = kept.setdefault(inst, [])
        if all(len(s & t) / len(s | t) < xi for _, t in prior):
            prior.append((i, s))
    return sorted(i for v in kept.values() for i, _ in v)
