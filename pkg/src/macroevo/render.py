"""Raster images of placements (PNG via Pillow)."""

from __future__ import annotations

import io
import math

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .netlist import Netlist, Placement

GRAY = "#808080"
CELL_BLUE = (40, 80, 220)
MIN_LABEL_PX = 12


def canvas_to_pixels(n: Netlist, px: int, x: float, y: float, w: float, h: float):
    """Pixel box (left, top, right, bottom) of a canvas rectangle; y is flipped."""
    sx, sy = px / n.canvas_width, px / n.canvas_height
    left = (x - n.canvas_x) * sx
    right = (x + w - n.canvas_x) * sx
    top = px - (y + h - n.canvas_y) * sy
    bottom = px - (y - n.canvas_y) * sy
    return left, top, right, bottom


def _box(left, top, right, bottom, px):
    l, t = max(0, math.floor(left)), max(0, math.floor(top))
    r, b = min(px, math.ceil(right)) - 1, min(px, math.ceil(bottom)) - 1
    return (l, t, r, b) if l <= r and t <= b else None


def render_canvas(p: Placement, n: Netlist, colors=None, highlights=(), px: int = 512) -> Image.Image:
    """Draw standard cells as blue dots and macros as colored boxes; bottom-left origin.

    ``colors`` is a ColorAssignment (or any object with ``color_of(i)``);
    highlighted macros get a red outline and their name when tall enough.
    Unplaced nodes and terminals are not drawn.
    """
    px = int(px)
    if px <= 0:
        raise ValueError("resolution must be positive")
    img = Image.new("RGB", (px, px), "white")
    draw = ImageDraw.Draw(img)
    placed = p.placed
    cells = np.flatnonzero(~n.is_macro & ~n.is_terminal & placed)
    if cells.size:
        cx = (p.x[cells] + 0.5 * n.widths[cells] - n.canvas_x) * (px / n.canvas_width)
        cy = px - (p.y[cells] + 0.5 * n.heights[cells] - n.canvas_y) * (px / n.canvas_height)
        for x, y in zip(cx.tolist(), cy.tolist()):
            b = _box(x - 1, y - 1, x + 1, y + 1, px)
            if b:
                draw.rectangle(b, fill=CELL_BLUE)
    hl = set(int(i) for i in highlights)
    font = ImageFont.load_default()
    macros = [int(i) for i in np.flatnonzero(n.is_macro & placed)]
    labels = []
    for i in macros:
        b = _box(*canvas_to_pixels(n, px, p.x[i], p.y[i], n.widths[i], n.heights[i]), px)
        if b is None:
            continue
        fill = colors.color_of(i) if colors is not None else GRAY
        draw.rectangle(b, fill=fill, outline="black", width=1)
        if i in hl:
            labels.append((i, b))
    for i, b in labels:
        draw.rectangle(b, outline=(230, 0, 0), width=2)
        if b[3] - b[1] + 1 >= MIN_LABEL_PX:
            draw.text((b[0] + 3, b[1] + 2), n.nodes[i].name, fill="black", font=font)
    return img


def png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def render_png(p: Placement, n: Netlist, colors=None, highlights=(), px: int = 512) -> bytes:
    return png_bytes(render_canvas(p, n, colors, highlights, px))
