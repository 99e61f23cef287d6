"""Synthetic text scenes with ground-truth components and link labels.

Instances are bands around a center line (straight, circular arc or sine
wave). Each instance keeps its top and bottom side chains; components tile
the center line end to end.
"""
from dataclasses import asdict, dataclass, field
import json
import math
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import LinearRing, Point, Polygon

from textlink.geometry import (
    W_MAX,
    W_MIN,
    TextComponent,
    assign_top_bottom,
    component_corners,
    vector_angle,
    width_from_height,
)

SCENE_FORMAT_VERSION = 1


class GenerationError(RuntimeError):
    pass


@dataclass
class TextInstancePoly:
    id: int
    top: np.ndarray
    bottom: np.ndarray

    @property
    def boundary(self) -> np.ndarray:
        return np.concatenate([self.top, self.bottom[::-1]])

    def polygon(self) -> Polygon:
        return Polygon(self.boundary)


@dataclass
class Scene:
    width: float
    height: float
    instances: List[TextInstancePoly] = field(default_factory=list)
    components: List[TextComponent] = field(default_factory=list)
    seed: Optional[int] = None


@dataclass
class TcrRegion:
    polygon: np.ndarray
    center_line: np.ndarray
    empty: bool = False


@dataclass
class GeneratorConfig:
    width: float = 640.0
    height: float = 640.0
    min_instances: int = 3
    max_instances: int = 6
    families: Tuple[str, ...] = ("line", "arc", "sine")
    height_range: Tuple[float, float] = (16.0, 36.0)
    length_range: Tuple[float, float] = (110.0, 300.0)
    max_tilt: float = math.pi / 3
    arc_sweep_range: Tuple[float, float] = (0.6, 2.2)
    sine_amplitude_range: Tuple[float, float] = (0.04, 0.12)  # fraction of length
    taper_range: Tuple[float, float] = (0.85, 1.15)  # end height / start height
    adjacent_prob: float = 0.3
    adjacent_gap_range: Tuple[float, float] = (0.15, 0.5)  # fraction of height
    margin: float = 12.0
    max_tries: int = 400
    w_min: float = W_MIN
    w_max: float = W_MAX
    overlap_factor: float = 1.0

    @classmethod
    def adversarial(cls, **kw) -> "GeneratorConfig":
        """Scenes dominated by closely stacked curved instances."""
        base = dict(families=("arc", "sine"), adjacent_prob=1.0, min_instances=2,
                    max_instances=4, adjacent_gap_range=(0.15, 0.45))
        base.update(kw)
        return cls(**base)


@dataclass
class NoiseModel:
    center_sigma: float = 0.06  # relative to component height
    height_sigma: float = 0.06  # relative
    theta_sigma: float = 0.06  # radians
    drop_rate: float = 0.03
    spurious_rate: float = 0.05
    true_score_range: Optional[Tuple[float, float]] = (0.75, 1.0)
    spurious_score_range: Tuple[float, float] = (0.3, 0.9)
    w_min: float = W_MIN
    w_max: float = W_MAX

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, None)


# ---------------------------------------------------------------------------
# center lines


def _center_line(family, length, rng, cfg):
    """Dense center line (k, 2) starting at the origin, in a local frame."""
    k = max(24, int(length / 4))
    s = np.linspace(0.0, length, k)
    if family == "line":
        pts = np.stack([s, np.zeros_like(s)], axis=1)
    elif family == "arc":
        sweep = rng.uniform(*cfg.arc_sweep_range)
        radius = length / sweep
        phi = s / radius
        sign = 1.0 if rng.random() < 0.5 else -1.0
        pts = np.stack([radius * np.sin(phi), sign * radius * (1 - np.cos(phi))], axis=1)
    elif family == "sine":
        amp = rng.uniform(*cfg.sine_amplitude_range) * length
        periods = rng.choice([0.5, 1.0])
        phase = rng.uniform(0, 2 * math.pi)
        y = amp * np.sin(2 * math.pi * periods * s / length + phase)
        pts = np.stack([s, y - y[0]], axis=1)
    else:
        raise ValueError(f"unknown center-line family {family!r}")
    return pts


def _normals(pts):
    """Unit normals pointing to the left of travel on screen (up for a rightward line)."""
    t = np.gradient(pts, axis=0)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    return np.stack([t[:, 1], -t[:, 0]], axis=1)


def _min_radius(pts):
    t = np.gradient(pts, axis=0)
    tt = np.gradient(t, axis=0)
    num = np.abs(t[:, 0] * tt[:, 1] - t[:, 1] * tt[:, 0])
    den = np.linalg.norm(t, axis=1) ** 3
    curv = num / np.maximum(den, 1e-12)
    return float(1.0 / max(curv.max(), 1e-12))


def _band(center, heights, iid):
    n = _normals(center)
    top = center + 0.5 * heights[:, None] * n
    bottom = center - 0.5 * heights[:, None] * n
    sides = assign_top_bottom(top, bottom)
    return TextInstancePoly(iid, sides.top, sides.bottom)


def _fits(poly: Polygon, cfg, placed: Sequence[Polygon]):
    if not poly.is_valid or not LinearRing(poly.exterior.coords).is_simple:
        return False
    minx, miny, maxx, maxy = poly.bounds
    m = cfg.margin
    if minx < m or miny < m or maxx > cfg.width - m or maxy > cfg.height - m:
        return False
    grown = poly.buffer(cfg.margin)
    return not any(grown.intersects(q) for q in placed)


def _sample_group(rng, cfg, first_id):
    """One instance, or a stacked pair sharing one center-line shape."""
    family = cfg.families[int(rng.integers(len(cfg.families)))]
    length = rng.uniform(*cfg.length_range)
    h0 = rng.uniform(*cfg.height_range)
    local = _center_line(family, length, rng, cfg)
    taper = rng.uniform(*cfg.taper_range)
    heights = h0 * np.linspace(1.0, taper, len(local))
    hmax = float(heights.max())
    pair = rng.random() < cfg.adjacent_prob
    gap = rng.uniform(*cfg.adjacent_gap_range) * hmax
    offset = hmax + gap
    if _min_radius(local) < (offset + hmax if pair else hmax):
        return None
    angle = rng.uniform(-cfg.max_tilt, cfg.max_tilt)
    if rng.random() < 0.5:
        local = local[::-1] - local[-1]
        heights = heights[::-1]
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    local = local @ rot.T
    lo, hi = local.min(axis=0), local.max(axis=0)
    pad = cfg.margin + 2 * offset
    span = np.array([cfg.width, cfg.height]) - (hi - lo) - 2 * pad
    if np.any(span <= 0):
        return None
    origin = np.array([rng.uniform(0, span[0]), rng.uniform(0, span[1])]) + pad - lo
    center = local + origin
    insts = [_band(center, heights, first_id)]
    if pair:
        side = 1.0 if rng.random() < 0.5 else -1.0
        shifted = center + side * offset * _normals(center)
        insts.append(_band(shifted, heights, first_id + 1))
    return insts


def generate_scene(config: Optional[GeneratorConfig] = None, seed: int = 0,
                   n_instances: Optional[int] = None) -> Scene:
    """Generate one scene; identical ``(config, seed)`` give identical scenes."""
    cfg = config or GeneratorConfig()
    rng = np.random.default_rng(seed)
    if n_instances is None:
        n_instances = int(rng.integers(cfg.min_instances, cfg.max_instances + 1))
    scene = Scene(cfg.width, cfg.height, seed=seed)
    placed: List[Polygon] = []
    tries = 0
    while len(scene.instances) < n_instances:
        tries += 1
        if tries > cfg.max_tries:
            raise GenerationError(
                f"could only place {len(scene.instances)} of {n_instances} instances in a "
                f"{cfg.width:g}x{cfg.height:g} scene with margin {cfg.margin:g} "
                f"after {cfg.max_tries} tries")
        group = _sample_group(rng, cfg, len(scene.instances))
        if group is None:
            continue
        group = group[: n_instances - len(scene.instances)]
        polys = [g.polygon() for g in group]
        if len(polys) == 2 and polys[0].intersects(polys[1]):
            continue
        if not all(_fits(p, cfg, placed) for p in polys):
            continue
        placed.extend(polys)
        scene.instances.extend(group)
    for inst in scene.instances:
        scene.components.extend(
            divide_instance(inst, cfg.w_min, cfg.w_max, cfg.overlap_factor))
    return scene


# ---------------------------------------------------------------------------
# per-instance decomposition


class _SideSampler:
    """Arc-length parametrisation of an instance center line."""

    def __init__(self, top, bottom):
        self.top = np.asarray(top, dtype=float)
        self.bottom = np.asarray(bottom, dtype=float)
        self.mid = 0.5 * (self.top + self.bottom)
        seg = np.linalg.norm(np.diff(self.mid, axis=0), axis=1)
        self.s = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.s[-1])

    def _interp(self, arr, s):
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        i = min(max(i, 0), len(self.s) - 2)
        ds = self.s[i + 1] - self.s[i]
        t = 0.0 if ds <= 0 else (s - self.s[i]) / ds
        return arr[i] + t * (arr[i + 1] - arr[i])

    def at(self, s):
        tp = self._interp(self.top, s)
        bp = self._interp(self.bottom, s)
        return tp, bp

    def height(self, s):
        tp, bp = self.at(s)
        return float(np.hypot(*(tp - bp)))


def _component_at(sampler, s, w_min, w_max, iid):
    tp, bp = sampler.at(s)
    v = tp - bp
    h = float(np.hypot(*v))
    theta = vector_angle(v) - math.pi / 2
    c = 0.5 * (tp + bp)
    return TextComponent.from_angle(c[0], c[1], h, width_from_height(h, w_min, w_max), theta,
                                    1.0, iid)


def divide_instance(inst: TextInstancePoly, w_min: float = W_MIN, w_max: float = W_MAX,
                    overlap_factor: float = 1.0) -> List[TextComponent]:
    """Tile the instance center line with abutting components, in reading order."""
    sampler = _SideSampler(inst.top, inst.bottom)
    length = sampler.length
    if len(inst.top) < 2 or length <= 0:
        raise ValueError(f"instance {inst.id} has a degenerate center line")
    centers = []
    s = 0.0
    end = 0.0
    while True:
        w = width_from_height(sampler.height(s), w_min, w_max)
        w = width_from_height(sampler.height(min(s + 0.5 * w, length)), w_min, w_max)
        if s + w > length + 1e-9:
            break
        centers.append(s + 0.5 * w)
        end = s + w
        s += w * overlap_factor
    if not centers:
        return [_component_at(sampler, 0.5 * length, w_min, w_max, inst.id)]
    shift = 0.5 * (length - end)
    return [_component_at(sampler, c + shift, w_min, w_max, inst.id) for c in centers]


def extract_tcr(inst: TextInstancePoly, w_min: float = W_MIN, w_max: float = W_MAX,
                end_shrink: float = 0.5, expand: float = 0.3) -> TcrRegion:
    """Text center region: the center line shortened at both ends, then widened."""
    sampler = _SideSampler(inst.top, inst.bottom)
    a = end_shrink * width_from_height(sampler.height(0.0), w_min, w_max)
    b = sampler.length - end_shrink * width_from_height(sampler.height(sampler.length), w_min, w_max)
    if b <= a:
        return TcrRegion(np.zeros((0, 2)), np.zeros((0, 2)), empty=True)
    stations = [a] + [float(x) for x in sampler.s if a < x < b] + [b]
    line, upper, lower = [], [], []
    for s in stations:
        tp, bp = sampler.at(s)
        v = tp - bp
        h = float(np.hypot(*v))
        c = 0.5 * (tp + bp)
        u = v / h
        line.append(c)
        upper.append(c + expand * h * u)
        lower.append(c - expand * h * u)
    poly = np.array(upper + lower[::-1])
    return TcrRegion(poly, np.array(line))


# ---------------------------------------------------------------------------
# proposal noise and labels


def _background_point(rng, scene, polys, margin):
    for _ in range(200):
        p = np.array([rng.uniform(margin, scene.width - margin),
                      rng.uniform(margin, scene.height - margin)])
        if not any(poly.distance(Point(p)) < margin for poly in polys):
            return p
    return None


def perturb_components(comps: Sequence[TextComponent], noise: Optional[NoiseModel] = None,
                       seed: int = 0, scene: Optional[Scene] = None) -> List[TextComponent]:
    """Simulate proposal error: jitter, drops, score noise and spurious boxes.

    Spurious components need ``scene`` to know where the background is; they
    carry ``instance_id=None``.
    """
    nm = noise or NoiseModel()
    rng = np.random.default_rng(seed)
    out = []
    for c in comps:
        keep = rng.random() >= nm.drop_rate
        jitter = rng.normal(size=4)
        score = rng.uniform(*nm.true_score_range) if nm.true_score_range else c.score
        if not keep:
            continue
        if nm.center_sigma == nm.height_sigma == nm.theta_sigma == 0.0:
            out.append(c.with_(score=float(score)))
            continue
        x = c.x + nm.center_sigma * c.h * jitter[0]
        y = c.y + nm.center_sigma * c.h * jitter[1]
        h = max(0.5, c.h * (1.0 + nm.height_sigma * jitter[2]))
        theta = c.theta + nm.theta_sigma * jitter[3]
        out.append(TextComponent.from_angle(x, y, h, width_from_height(h, nm.w_min, nm.w_max),
                                            theta, float(score), c.instance_id))
    if scene is not None and nm.spurious_rate > 0 and comps:
        polys = [inst.polygon() for inst in scene.instances]
        n_sp = int(rng.binomial(len(comps), nm.spurious_rate))
        hs = np.array([c.h for c in comps])
        for _ in range(n_sp):
            p = _background_point(rng, scene, polys, margin=float(hs.max()))
            if p is None:
                continue
            h = float(rng.uniform(hs.min(), hs.max()))
            out.append(TextComponent.from_angle(
                p[0], p[1], h, width_from_height(h, nm.w_min, nm.w_max),
                rng.uniform(-math.pi, math.pi), float(rng.uniform(*nm.spurious_score_range)),
                None))
    return out


def link_labels(comps: Sequence[TextComponent]) -> Callable[[int, int], int]:
    """``label(i, j)`` is 1 iff both components belong to the same known instance."""
    ids = [c.instance_id for c in comps]

    def label(i: int, j: int) -> int:
        return int(ids[i] is not None and ids[i] == ids[j])

    return label


def check_scene(scene: Scene) -> List[str]:
    """Return a list of violated scene invariants (empty when the scene is valid)."""
    problems = []
    polys = {inst.id: inst.polygon() for inst in scene.instances}
    for inst in scene.instances:
        if not LinearRing(inst.boundary).is_simple:
            problems.append(f"instance {inst.id}: boundary self-intersects")
    for k, c in enumerate(scene.components):
        corners = component_corners(c)
        if (corners[:, 0].min() < 0 or corners[:, 1].min() < 0
                or corners[:, 0].max() >= scene.width or corners[:, 1].max() >= scene.height):
            problems.append(f"component {k}: outside the scene")
        if c.instance_id is not None:
            poly = polys.get(c.instance_id)
            if poly is None or poly.distance(Point(c.x, c.y)) > 1e-6:
                problems.append(f"component {k}: center outside instance {c.instance_id}")
    return problems


# ---------------------------------------------------------------------------
# serialisation


def scene_to_json(scene: Scene) -> dict:
    return {
        "format_version": SCENE_FORMAT_VERSION,
        "seed": scene.seed,
        "width": scene.width,
        "height": scene.height,
        "instances": [
            {"id": inst.id, "boundary": inst.boundary.tolist(), "top": inst.top.tolist(),
             "bottom": inst.bottom.tolist()}
            for inst in scene.instances
        ],
        "components": [c.to_json() for c in scene.components],
    }


def scene_from_json(d: dict) -> Scene:
    version = d.get("format_version", SCENE_FORMAT_VERSION)
    if version != SCENE_FORMAT_VERSION:
        raise ValueError(f"unsupported scene format version {version}")
    insts = [TextInstancePoly(int(i["id"]), np.asarray(i["top"], dtype=float),
                              np.asarray(i["bottom"], dtype=float)) for i in d["instances"]]
    comps = [TextComponent.from_json(c) for c in d["components"]]
    return Scene(float(d["width"]), float(d["height"]), insts, comps, d.get("seed"))


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_json(scene)))


def load_scene(path) -> Scene:
    return scene_from_json(json.loads(Path(path).read_text()))


def noise_to_json(nm: NoiseModel) -> dict:
    return asdict(nm)
