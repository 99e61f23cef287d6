"""Pivot-centred local graphs over a scene's components."""
from dataclasses import dataclass, field
import json
from typing import Dict, List, Optional, Sequence

import numpy as np

from textlink.geometry import TextComponent
from textlink.synth import link_labels

ONE_HOP_K = 8
TWO_HOP_K = 4
ADJ_U = 3
PIVOT_XI = 0.75


@dataclass
class LocalGraph:
    pivot: int
    nodes: List[int]
    one_hop: List[int]
    adjacency: np.ndarray
    labels: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def usable(self) -> bool:
        return len(self.nodes) >= 2 and len(self.one_hop) > 0

    @property
    def one_hop_positions(self) -> np.ndarray:
        """Row indices of the 1-hop nodes inside ``nodes``."""
        return np.arange(1, 1 + len(self.one_hop))

    def to_json(self) -> dict:
        return {
            "pivot": self.pivot,
            "nodes": list(self.nodes),
            "one_hop": list(self.one_hop),
            "adjacency": self.adjacency.astype(int).ravel().tolist(),
            "labels": None if self.labels is None else [int(v) for v in self.labels],
        }

    @classmethod
    def from_json(cls, d: dict) -> "LocalGraph":
        n = len(d["nodes"])
        labels = d.get("labels")
        return cls(int(d["pivot"]), [int(v) for v in d["nodes"]], [int(v) for v in d["one_hop"]],
                   np.asarray(d["adjacency"], dtype=float).reshape(n, n),
                   None if labels is None else np.asarray(labels, dtype=np.int64))


@dataclass
class GraphBatch:
    components: Sequence[TextComponent]
    graphs: List[LocalGraph] = field(default_factory=list)
    width: float = 0.0
    height: float = 0.0


def euclidean_similarity(pivot: TextComponent, node: TextComponent, scene_w: float,
                         scene_h: float) -> float:
    if scene_w <= 0 or scene_h <= 0:
        raise ValueError("scene dimensions must be positive")
    d = float(np.hypot(pivot.x - node.x, pivot.y - node.y))
    return 1.0 - d / max(scene_w, scene_h)


class NeighborIndex:
    """All-pairs similarity ranking for one component list.

    Ties in similarity are broken by ascending component index.
    """

    def __init__(self, comps: Sequence[TextComponent], scene_w: float, scene_h: float):
        if scene_w <= 0 or scene_h <= 0:
            raise ValueError("scene dimensions must be positive")
        self.n = len(comps)
        xy = np.array([[c.x, c.y] for c in comps], dtype=float).reshape(-1, 2)
        self.dist = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        self.similarity = 1.0 - self.dist / max(scene_w, scene_h)
        order = np.argsort(-self.similarity, axis=1, kind="stable")
        self._ranked = [[int(j) for j in row if j != i] for i, row in enumerate(order)]

    def nearest(self, i: int, k: int) -> List[int]:
        return self._ranked[i][:k]


def build_local_graph(pivot: int, comps: Sequence[TextComponent], scene_w: float,
                      scene_h: float, index: Optional[NeighborIndex] = None,
                      k1: int = ONE_HOP_K, k2: int = TWO_HOP_K, u: int = ADJ_U) -> LocalGraph:
    """Pivot, its ``k1`` nearest neighbours and ``k2`` nearest of each of those.

    A single-component scene gives a graph with no neighbours; its ``usable``
    flag is False.
    """
    index = index or NeighborIndex(comps, scene_w, scene_h)
    one_hop = index.nearest(pivot, k1)
    seen = {pivot, *one_hop}
    two_hop = []
    for q in one_hop:
        for r in index.nearest(q, k2):
            if r not in seen:
                seen.add(r)
                two_hop.append(r)
    nodes = [pivot, *one_hop, *two_hop]
    g = LocalGraph(pivot, nodes, list(one_hop), np.zeros((len(nodes), len(nodes))))
    g.adjacency = adjacency_matrix(g, comps, u, index=index)
    return g


def adjacency_matrix(g: LocalGraph, comps: Sequence[TextComponent], u: int = ADJ_U,
                     index: Optional[NeighborIndex] = None) -> np.ndarray:
    """Binary top-``u`` nearest-neighbour adjacency, symmetrised by union."""
    if u < 1:
        raise ValueError("u must be at least 1")
    nodes = np.asarray(g.nodes)
    n = len(nodes)
    if index is not None:
        d = index.dist[np.ix_(nodes, nodes)]
    else:
        xy = np.array([[comps[i].x, comps[i].y] for i in nodes], dtype=float).reshape(-1, 2)
        d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    a = np.zeros((n, n))
    for i in range(n):
        cand = [j for j in range(n) if j != i]
        cand.sort(key=lambda j: (d[i, j], nodes[j]))
        a[i, cand[:u]] = 1.0
    a = np.maximum(a, a.T)
    np.fill_diagonal(a, 0.0)
    return a


def graph_iou(g_p: LocalGraph, g_q: LocalGraph) -> float:
    """Overlap of two graphs' 1-hop sets; 0 when both are empty."""
    a, b = set(g_p.one_hop), set(g_q.one_hop)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def label_graph(g: LocalGraph, comps: Sequence[TextComponent]) -> LocalGraph:
    label = link_labels(comps)
    g.labels = np.array([label(g.pivot, q) for q in g.one_hop], dtype=np.int64)
    return g


def select_training_pivots(comps: Sequence[TextComponent], scene_w: float, scene_h: float,
                           xi: float = PIVOT_XI, include_unlabeled: bool = True,
                           index: Optional[NeighborIndex] = None, **graph_kw) -> List[LocalGraph]:
    """Labelled training graphs with near-duplicate pivots of one instance removed.

    Within each instance a pivot is kept only when its graph overlaps every
    previously kept graph of that instance by less than ``xi``. Components
    without an instance (spurious proposals) are kept as pivots of their own
    when ``include_unlabeled`` is set.
    """
    if len(comps) < 2:
        return []
    index = index or NeighborIndex(comps, scene_w, scene_h)
    groups: Dict[object, List[int]] = {}
    for i, c in enumerate(comps):
        key = c.instance_id if c.instance_id is not None else ("none", i)
        groups.setdefault(key, []).append(i)
    keys = sorted((k for k in groups if not isinstance(k, tuple)))
    if include_unlabeled:
        keys += sorted((k for k in groups if isinstance(k, tuple)), key=lambda k: k[1])
    out = []
    for key in keys:
        kept: List[LocalGraph] = []
        for i in groups[key]:
            g = build_local_graph(i, comps, scene_w, scene_h, index=index, **graph_kw)
            if not g.usable:
                continue
            if all(graph_iou(g, k) < xi for k in kept):
                kept.append(label_graph(g, comps))
        out.extend(kept)
    return out


def dump_graph(g: LocalGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh)
