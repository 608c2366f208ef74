"""Static SVG drawings of annotations and detections, coloured by class."""
from __future__ import annotations

import colorsys
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

from .evaluation import Annotation, Detection


def class_color(class_id: int) -> str:
    # golden-ratio hue walk keeps neighbouring ids apart
    h = (class_id * 0.618033988749895) % 1.0
    r, g, b = colorsys.hsv_to_rgb(h, 0.75, 0.9)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


def _num(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _points(quad) -> str:
    return " ".join(f"{_num(x)},{_num(y)}" for x, y in quad.vertices)


def render_svg(image_id: str, annotations: Sequence[Annotation], detections: Sequence[Detection],
               class_names: Sequence[str], size: tuple[float, float] | None = None) -> str:
    """Ground truth as solid outlines, detections dashed with their score."""
    if size is None:
        xs = [x for q in [a.quad for a in annotations] + [d.quad for d in detections] for x, _ in q.vertices]
        ys = [y for q in [a.quad for a in annotations] + [d.quad for d in detections] for _, y in q.vertices]
        size = (max(xs + [1.0]) + 10, max(ys + [1.0]) + 10)
    width, height = size

    def name(c):
        return class_names[c] if 0 <= c < len(class_names) else str(c)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}">',
        f"<title>{escape(image_id)}</title>",
        f'<rect width="100%" height="100%" fill="#202020"/>',
        '<g class="annotations" fill="none" stroke-width="2">',
    ]
    for a in annotations:
        dash = ' stroke-dasharray="2,2" opacity="0.6"' if a.difficult else ""
        out.append(f'<polygon points="{_points(a.quad)}" stroke="{class_color(a.class_id)}"{dash}>'
                   f"<title>{escape(name(a.class_id))}</title></polygon>")
    out.append("</g>")
    out.append('<g class="detections" fill="none" stroke-width="1.5" stroke-dasharray="6,3">')
    for d in sorted(detections, key=lambda d: (-d.score, d.class_id)):
        label = f"{name(d.class_id)} {d.score:.2f}"
        x0, y0 = d.quad.vertices[0]
        out.append(f'<polygon points="{_points(d.quad)}" stroke="{class_color(d.class_id)}">'
                   f"<title>{escape(label)}</title></polygon>")
        out.append(f'<text x="{_num(x0)}" y="{_num(y0 - 3)}" font-size="10" '
                   f'fill={quoteattr(class_color(d.class_id))}>{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
