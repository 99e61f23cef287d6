"""Instance-level detection metrics and the grouping ablation."""
from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import Polygon

from textlink.geometry import TextComponent
from textlink.inference import DetectConfig, DetectedInstance, build_instances, locality_aware_nms


class InvalidPolygonError(ValueError):
    pass


@dataclass
class MatchReport:
    precision: float
    recall: float
    hmean: float
    matches: List[Tuple[int, int, float]] = field(default_factory=list)
    iou_threshold: float = 0.5
    n_pred: int = 0
    n_gt: int = 0

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "hmean": self.hmean,
                "matches": [[p, g, iou] for p, g, iou in self.matches],
                "iou_threshold": self.iou_threshold, "n_pred": self.n_pred, "n_gt": self.n_gt}


def hmean(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _as_polygon(pts) -> Polygon:
    poly = Polygon(np.asarray(pts, dtype=float))
    if not poly.is_valid:
        raise InvalidPolygonError("polygon is not simple")
    return poly


def polygon_iou(a, b) -> float:
    """Area of intersection over area of union of two simple polygons."""
    pa, pb = _as_polygon(a), _as_polygon(b)
    union = pa.union(pb).area
    if union <= 0:
        return 0.0
    return float(pa.intersection(pb).area / union)


def _safe_iou(a, b) -> float:
    """IoU that repairs self-touching predictions instead of failing the whole scene."""
    pa, pb = Polygon(np.asarray(a, dtype=float)), Polygon(np.asarray(b, dtype=float))
    if not pa.is_valid:
        pa = pa.buffer(0)
    if not pb.is_valid:
        pb = pb.buffer(0)
    union = pa.union(pb).area
    return float(pa.intersection(pb).area / union) if union > 0 else 0.0


def iou_matrix(preds: Sequence, gts: Sequence, strict: bool = False) -> np.ndarray:
    f = polygon_iou if strict else _safe_iou
    m = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            m[i, j] = f(p, g)
    return m


def match_instances(preds: Sequence, gts: Sequence, iou_threshold: float = 0.5,
                    ious: Optional[np.ndarray] = None) -> MatchReport:
    """Greedy one-to-one matching by descending IoU among pairs above the threshold."""
    m = iou_matrix(preds, gts) if ious is None else ious
    pairs = [(m[i, j], i, j) for i in range(len(preds)) for j in range(len(gts))
             if m[i, j] >= iou_threshold]
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_p, used_g, matches = set(), set(), []
    for iou, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j, float(iou)))
    p = len(matches) / len(preds) if preds else (1.0 if not gts else 0.0)
    r = len(matches) / len(gts) if gts else (1.0 if not preds else 0.0)
    return MatchReport(p, r, hmean(p, r), matches, iou_threshold, len(preds), len(gts))


def aggregate(reports: Sequence[MatchReport]) -> Dict[str, float]:
    """Pool match counts over scenes."""
    tp = sum(len(r.matches) for r in reports)
    n_pred = sum(r.n_pred for r in reports)
    n_gt = sum(r.n_gt for r in reports)
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gt if n_gt else 0.0
    return {"P": p, "R": r, "H": hmean(p, r), "tp": tp, "n_pred": n_pred, "n_gt": n_gt}


def format_table(rows: Dict[str, Dict[str, float]]) -> str:
    """Recall / precision / Hmean table, values in percent."""
    lines = [f"{'method':<16}{'R':>8}{'P':>8}{'H':>8}"]
    for name, agg in rows.items():
        lines.append(f"{name:<16}{100 * agg['R']:>8.2f}{100 * agg['P']:>8.2f}{100 * agg['H']:>8.2f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# heuristic grouping baseline


def baseline_grouping(comps: Sequence[TextComponent], distance_factor: float = 1.2,
                      max_angle: float = math.pi / 6) -> List[List[int]]:
    """Link close, similarly oriented components; return connected components."""
    n = len(comps)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        a = comps[i]
        for j in range(i + 1, n):
            b = comps[j]
            dist = math.hypot(a.x - b.x, a.y - b.y)
            if dist >= distance_factor * 0.5 * (a.h + b.h):
                continue
            # orientations are axial: theta and theta + pi coincide
            cosd = abs(a.cos_t * b.cos_t + a.sin_t * b.sin_t)
            if math.acos(min(1.0, cosd)) >= max_angle:
                continue
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: Dict[int, List[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def detect_baseline(comps: Sequence[TextComponent], cfg: Optional[DetectConfig] = None,
                    distance_factor: float = 1.2) -> List[DetectedInstance]:
    """Same pre- and post-processing as ``detect`` with heuristic grouping."""
    cfg = cfg or DetectConfig()
    idx = [i for i, c in enumerate(comps) if c.score >= cfg.score_threshold]
    kept, src = locality_aware_nms([comps[i] for i in idx], cfg.nms_threshold, cfg.nms_merge)
    sources = [idx[s] for s in src]
    clusters = baseline_grouping(kept, distance_factor)
    return build_instances(kept, sources, clusters, cfg)


def evaluate_scene(instances: Sequence[DetectedInstance], gt_boundaries: Sequence,
                   iou_threshold: float = 0.5) -> MatchReport:
    return match_instances([inst.boundary for inst in instances], list(gt_boundaries),
                           iou_threshold)
