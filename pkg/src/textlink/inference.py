"""Grouping scored components into ordered text instances with boundaries."""
from collections import deque
from dataclasses import dataclass, field
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from textlink import kernels
from textlink.data import graph_to_sample
from textlink.features import EmbeddingConfig, FeatureProvider
from textlink.gcn import GcnModel, predict_link_probs
from textlink.geometry import TextComponent, component_corners, corners_array, polygon_area
from textlink.graph import NeighborIndex, build_local_graph

PairScorer = Callable[[int, int], float]


@dataclass
class DetectConfig:
    score_threshold: float = 0.5
    nms_threshold: float = 0.5
    nms_merge: bool = True
    link_threshold: float = 0.5
    min_cluster_size: int = 2
    solo_threshold: float = 0.95
    exact_path_limit: int = 12
    quads: bool = False


@dataclass
class LinkGraph:
    """Aggregated pivot-neighbour link likelihoods keyed by ``(low, high)`` index."""

    n: int
    edges: Dict[Tuple[int, int], Tuple[float, int]] = field(default_factory=dict)

    def add(self, i: int, j: int, p: float) -> None:
        key = (i, j) if i < j else (j, i)
        mean, count = self.edges.get(key, (0.0, 0))
        self.edges[key] = ((mean * count + p) / (count + 1), count + 1)

    def likelihood(self, i: int, j: int) -> Optional[float]:
        e = self.edges.get((i, j) if i < j else (j, i))
        return None if e is None else e[0]


@dataclass
class DetectedInstance:
    components: List[TextComponent]
    indices: List[int]
    boundary: np.ndarray
    quad: Optional[np.ndarray] = None
    score: float = 0.0

    def to_json(self) -> dict:
        d = {"components": [int(i) for i in self.indices], "boundary": self.boundary.tolist(),
             "score": self.score}
        if self.quad is not None:
            d["quad"] = self.quad.tolist()
        return d


# ---------------------------------------------------------------------------
# proposal clean-up


def score_filter(comps: Sequence[TextComponent], threshold: float) -> List[TextComponent]:
    return [c for c in comps if c.score >= threshold]


def _merge_pair(a: TextComponent, b: TextComponent) -> TextComponent:
    wa, wb = a.score, b.score
    tot = wa + wb if wa + wb > 0 else 1.0
    ca, sa, cb, sb = a.cos_t, a.sin_t, b.cos_t, b.sin_t
    if ca * cb + sa * sb < 0:  # theta and theta + pi are the same rectangle
        cb, sb = -cb, -sb
    c, s = (wa * ca + wb * cb) / tot, (wa * sa + wb * sb) / tot
    norm = math.hypot(c, s) or 1.0
    best = a if wa >= wb else b
    return TextComponent(
        (wa * a.x + wb * b.x) / tot, (wa * a.y + wb * b.y) / tot,
        (wa * a.h + wb * b.h) / tot, (wa * a.w + wb * b.w) / tot,
        c / norm, s / norm, max(wa, wb), best.instance_id)


def locality_merge(comps: Sequence[TextComponent], threshold: float) -> Tuple[List[TextComponent], List[int]]:
    """Row-order pass that fuses consecutive near-duplicates (score-weighted)."""
    order = sorted(range(len(comps)), key=lambda i: (comps[i].y, comps[i].x, i))
    out: List[TextComponent] = []
    src: List[int] = []
    last, last_src = None, -1
    for i in order:
        c = comps[i]
        if last is not None and kernels.convex_iou(component_corners(last),
                                                   component_corners(c)) > threshold:
            if c.score > last.score:
                last_src = i
            last = _merge_pair(last, c)
            continue
        if last is not None:
            out.append(last)
            src.append(last_src)
        last, last_src = c, i
    if last is not None:
        out.append(last)
        src.append(last_src)
    return out, src


def greedy_nms_order(comps: Sequence[TextComponent]) -> np.ndarray:
    scores = np.array([c.score for c in comps])
    return np.lexsort((np.arange(len(comps)), -scores))


def locality_aware_nms(comps: Sequence[TextComponent], iou_threshold: float = 0.5,
                       merge: bool = True) -> Tuple[List[TextComponent], List[int]]:
    """Optional locality merge, then greedy suppression by descending score.

    Returns the surviving components and, for each, the index of the input
    component it stems from.
    """
    if not comps:
        return [], []
    if merge:
        work, src = locality_merge(comps, iou_threshold)
    else:
        work, src = list(comps), list(range(len(comps)))
    keep = kernels.greedy_nms(corners_array(work), greedy_nms_order(work), iou_threshold)
    keep = sorted(keep)
    return [work[k] for k in keep], [src[k] for k in keep]


# ---------------------------------------------------------------------------
# linkage


def collect_link_scores(comps: Sequence[TextComponent], model: Union[GcnModel, PairScorer],
                        scene_w: float, scene_h: float,
                        provider: Optional[FeatureProvider] = None,
                        cfg: Optional[EmbeddingConfig] = None) -> LinkGraph:
    """Score every (pivot, 1-hop neighbour) pair over all pivots.

    ``model`` is a trained network or any ``(pivot, neighbour) -> probability``
    callable. Pairs seen from both directions are averaged.
    """
    links = LinkGraph(len(comps))
    if len(comps) < 2:
        return links
    index = NeighborIndex(comps, scene_w, scene_h)
    graphs = [build_local_graph(p, comps, scene_w, scene_h, index=index) for p in range(len(comps))]
    graphs = [g for g in graphs if g.usable]
    if isinstance(model, GcnModel):
        cfg = cfg or EmbeddingConfig(model.c_eps)
        samples = [graph_to_sample(g, comps, provider, cfg) for g in graphs]
        probs = predict_link_probs(model, samples)
    else:
        probs = [np.array([model(g.pivot, q) for q in g.one_hop], dtype=float) for g in graphs]
    for g, p in zip(graphs, probs):
        for q, v in zip(g.one_hop, p):
            links.add(g.pivot, q, float(v))
    return links


def bfs_cluster(links: LinkGraph, link_threshold: float, n: Optional[int] = None) -> List[List[int]]:
    """Connected components over edges whose likelihood reaches the threshold."""
    n = links.n if n is None else n
    adj: List[List[int]] = [[] for _ in range(n)]
    for (i, j), (p, _) in sorted(links.edges.items()):
        if p >= link_threshold:
            adj[i].append(j)
            adj[j].append(i)
    seen = [False] * n
    clusters = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [], deque([s])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        clusters.append(sorted(comp))
    return clusters


# ---------------------------------------------------------------------------
# ordering and boundaries


def path_length(points: np.ndarray, order: Sequence[int]) -> float:
    p = points[list(order)]
    return float(np.sum(np.hypot(*np.diff(p, axis=0).T))) if len(p) > 1 else 0.0


def _two_opt(d: np.ndarray, order: List[int]) -> List[int]:
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = order[i - 1] if i > 0 else None
                b, c = order[i], order[j]
                e = order[j + 1] if j + 1 < n else None
                old = (d[a, b] if a is not None else 0.0) + (d[c, e] if e is not None else 0.0)
                new = (d[a, c] if a is not None else 0.0) + (d[b, e] if e is not None else 0.0)
                if new < old - 1e-12:
                    order[i:j + 1] = order[i:j + 1][::-1]
                    improved = True
    return order


def _heuristic_path(d: np.ndarray) -> List[int]:
    n = len(d)
    best, best_len = None, math.inf
    for start in range(n):
        order = [start]
        left = set(range(n)) - {start}
        while left:
            cur = order[-1]
            nxt = min(left, key=lambda k: (d[cur, k], k))
            order.append(nxt)
            left.remove(nxt)
        length = sum(d[order[k], order[k + 1]] for k in range(n - 1))
        if length < best_len:
            best, best_len = order, length
    return _two_opt(d, best)


def min_path_order(points: np.ndarray, exact_limit: int = 12) -> List[int]:
    """Shortest open path through the points, canonically oriented."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n <= 1:
        return list(range(n))
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    order = kernels.open_path_dp(d) if n <= exact_limit else _heuristic_path(d)
    if tuple(pts[order[0]]) > tuple(pts[order[-1]]):
        order = order[::-1]
    return [int(k) for k in order]


def order_components(cluster: Sequence[TextComponent], exact_limit: int = 12) -> List[TextComponent]:
    if not cluster:
        raise ValueError("cannot order an empty cluster")
    order = min_path_order(np.array([[c.x, c.y] for c in cluster]), exact_limit)
    return [cluster[k] for k in order]


def _across_axes(ordered: Sequence[TextComponent]) -> np.ndarray:
    """Unit vectors from bottom to top side, made consistent along the chain."""
    ax = np.array([[-c.sin_t, -c.cos_t] for c in ordered])
    for k in range(1, len(ax)):
        if np.dot(ax[k], ax[k - 1]) < 0:
            ax[k] = -ax[k]
    if np.sum(-ax[:, 1]) < 0:  # image y grows downward
        ax = -ax
    return ax


def generate_boundary(ordered: Sequence[TextComponent]) -> np.ndarray:
    """Top mid-points in order followed by bottom mid-points reversed."""
    if len(ordered) == 1:
        return component_corners(ordered[0])
    ctr = np.array([[c.x, c.y] for c in ordered])
    half = np.array([0.5 * c.h for c in ordered])[:, None]
    ax = _across_axes(ordered)
    top = ctr + half * ax
    bottom = ctr - half * ax
    return np.concatenate([top, bottom[::-1]])


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    pts = sorted(set(map(tuple, np.asarray(pts, dtype=float))))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def min_area_rect(pts) -> np.ndarray:
    """Minimum-area enclosing rectangle; one hull edge is always flush with a side."""
    hull = _convex_hull(pts)
    if len(hull) < 3 or polygon_area(hull) <= 1e-12:
        raise ValueError("degenerate polygon has no enclosing rectangle")
    best, best_area = None, math.inf
    for k in range(len(hull)):
        e = hull[(k + 1) % len(hull)] - hull[k]
        norm = math.hypot(*e)
        if norm == 0:
            continue
        u = e / norm
        v = np.array([-u[1], u[0]])
        pu, pv = hull @ u, hull @ v
        area = (pu.max() - pu.min()) * (pv.max() - pv.min())
        if area < best_area - 1e-12:
            best_area = area
            best = np.array([
                pu.min() * u + pv.min() * v, pu.max() * u + pv.min() * v,
                pu.max() * u + pv.max() * v, pu.min() * u + pv.max() * v,
            ])
    return best


def polygon_centroid(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = cr.sum() / 2
    if abs(a) < 1e-12:
        return p.mean(axis=0)
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6 * a)


def shrink_polygon(poly, factor: float = 0.95) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    c = polygon_centroid(p)
    return c + factor * (p - c)


def to_quad(boundary, shrink: float = 0.95) -> np.ndarray:
    """Shrink the boundary about its centroid, then take the smallest enclosing rectangle."""
    p = np.asarray(boundary, dtype=float)
    if len(p) < 3 or polygon_area(p) <= 1e-12:
        raise ValueError("degenerate boundary cannot be converted to a quadrilateral")
    return min_area_rect(shrink_polygon(p, shrink))


# ---------------------------------------------------------------------------
# pipeline


def build_instances(comps: Sequence[TextComponent], sources: Sequence[int],
                    clusters: Sequence[Sequence[int]], cfg: DetectConfig) -> List[DetectedInstance]:
    """Order, outline and gate each cluster (shared by every grouping method)."""
    out = []
    for cl in clusters:
        members = [comps[k] for k in cl]
        score = float(np.mean([c.score for c in members]))
        if len(cl) < cfg.min_cluster_size and max(c.score for c in members) < cfg.solo_threshold:
            continue
        pts = np.array([[c.x, c.y] for c in members])
        order = min_path_order(pts, cfg.exact_path_limit)
        ordered = [members[k] for k in order]
        boundary = generate_boundary(ordered)
        quad = to_quad(boundary) if cfg.quads else None
        out.append(DetectedInstance(ordered, [int(sources[cl[k]]) for k in order], boundary,
                                    quad, score))
    return out


def detect(comps: Sequence[TextComponent], model: Union[GcnModel, PairScorer],
           scene_w: float, scene_h: float, cfg: Optional[DetectConfig] = None,
           provider: Optional[FeatureProvider] = None) -> List[DetectedInstance]:
    """Full inference: filter, suppress, link, cluster, order and outline."""
    cfg = cfg or DetectConfig()
    if not comps:
        return []
    idx = [i for i, c in enumerate(comps) if c.score >= cfg.score_threshold]
    kept, src = locality_aware_nms([comps[i] for i in idx], cfg.nms_threshold, cfg.nms_merge)
    sources = [idx[s] for s in src]
    if not kept:
        return []
    if not isinstance(model, GcnModel):
        scorer = model
        model = lambda p, q: scorer(sources[p], sources[q])  # noqa: E731
    links = collect_link_scores(kept, model, scene_w, scene_h, provider)
    clusters = bfs_cluster(links, cfg.link_threshold, len(kept))
    return build_instances(kept, sources, clusters, cfg)


def detections_to_json(scene_name: str, instances: Sequence[DetectedInstance], **extra) -> dict:
    d = {"scene": scene_name, "instances": [inst.to_json() for inst in instances]}
    d.update(extra)
    return d
