"""Static SVG drawings of scenes, local-graph edges and detections."""
from typing import Optional, Sequence, Tuple
from xml.sax.saxutils import escape

from textlink.geometry import component_corners
from textlink.synth import Scene

_PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6",
            "#bcf60c", "#008080", "#9a6324")


def _pts(poly) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in poly)


def render_svg(scene: Scene, detections: Optional[dict] = None,
               edges: Sequence[Tuple[int, int]] = ()) -> str:
    w, h = scene.width, scene.height
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{h:g}" '
           f'viewBox="0 0 {w:g} {h:g}">',
           f'<rect width="{w:g}" height="{h:g}" fill="white"/>']
    for inst in scene.instances:
        out.append(f'<polygon points="{_pts(inst.boundary)}" fill="#eeeeee" stroke="#999999" '
                   f'stroke-width="1"><title>instance {inst.id}</title></polygon>')
    comps = scene.components
    for i, j in edges:
        a, b = comps[i], comps[j]
        out.append(f'<line x1="{a.x:.2f}" y1="{a.y:.2f}" x2="{b.x:.2f}" y2="{b.y:.2f}" '
                   f'stroke="#bbbbff" stroke-width="0.7"/>')
    for k, c in enumerate(comps):
        color = "#555555" if c.instance_id is None else _PALETTE[c.instance_id % len(_PALETTE)]
        out.append(f'<polygon points="{_pts(component_corners(c))}" fill="none" '
                   f'stroke="{color}" stroke-width="0.8"><title>{k} score {c.score:.2f}'
                   f'</title></polygon>')
    if detections:
        for n, inst in enumerate(detections.get("instances", [])):
            out.append(f'<polygon points="{_pts(inst["boundary"])}" fill="none" stroke="black" '
                       f'stroke-width="2"><title>{escape(str(n))}</title></polygon>')
            if inst.get("quad"):
                out.append(f'<polygon points="{_pts(inst["quad"])}" fill="none" stroke="#ff8800" '
                           f'stroke-dasharray="4 2" stroke-width="1"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
