"""Greedy macro legalization: remove macro overlap and pull nodes into the canvas."""

from __future__ import annotations

import numpy as np

from .netlist import Netlist, Placement


class LegalizationError(RuntimeError):
    pass


def _hits(x, y, w, h, boxes: np.ndarray) -> np.ndarray:
    """For candidate corners (x, y), whether a w x h box overlaps any committed box."""
    if not boxes.size:
        return np.zeros(x.shape, dtype=bool)
    ox = np.minimum(x[:, None] + w, boxes[None, :, 0] + boxes[None, :, 2]) - np.maximum(x[:, None], boxes[None, :, 0])
    oy = np.minimum(y[:, None] + h, boxes[None, :, 1] + boxes[None, :, 3]) - np.maximum(y[:, None], boxes[None, :, 1])
    return ((ox > 0) & (oy > 0)).any(axis=1)


def _inside(x, y, w, h, n: Netlist) -> bool:
    return (x >= n.canvas_x and y >= n.canvas_y
            and x + w <= n.canvas_x + n.canvas_width and y + h <= n.canvas_y + n.canvas_height)


def _axis_candidates(lo: float, length: float, size: float, pitch: float, steps: int,
                     edges_lo: np.ndarray, edges_hi: np.ndarray, own: float) -> np.ndarray:
    top = lo + length - size
    vals = np.concatenate([lo + pitch * np.arange(steps + 1), edges_hi, edges_lo - size,
                           [lo, top, min(max(own, lo), top)]])
    vals = vals[(vals >= lo) & (vals + size <= lo + length)]
    return np.unique(vals)


def legalize(p: Placement, n: Netlist) -> Placement:
    """Make macros overlap-free and inside the canvas, moving as few as possible.

    Immovable macros are committed first and never moved. Movable macros
    follow by descending area (then name): a macro that is in-canvas and clear
    of everything committed keeps its position, otherwise it moves to the
    nearest clear spot among grid lines and edges of committed macros. Movable
    standard cells are only clamped into the canvas. Legal input comes back
    unchanged.
    """
    if not np.all(p.placed[n.is_macro]):
        raise LegalizationError("all macros must be placed before legalization")
    macro_area = float((n.widths * n.heights)[n.is_macro].sum())
    if macro_area > n.canvas_width * n.canvas_height:
        raise LegalizationError(
            f"total macro area {macro_area:g} exceeds canvas area {n.canvas_width * n.canvas_height:g}")
    out = p.copy()
    committed = []
    for i in np.flatnonzero(n.is_macro & ~n.movable):
        committed.append((p.x[i], p.y[i], n.widths[i], n.heights[i]))
    movable = [int(i) for i in np.flatnonzero(n.is_macro & n.movable)]
    movable.sort(key=lambda i: (-n.nodes[i].area, n.nodes[i].name))
    for i in movable:
        w, h = n.widths[i], n.heights[i]
        x, y = p.x[i], p.y[i]
        boxes = np.array(committed, dtype=float).reshape(-1, 4)
        if _inside(x, y, w, h, n) and not _hits(np.array([x]), np.array([y]), w, h, boxes)[0]:
            committed.append((x, y, w, h))
            continue
        xs = _axis_candidates(n.canvas_x, n.canvas_width, w, n.pitch_x, n.grid_cols,
                              boxes[:, 0], boxes[:, 0] + boxes[:, 2], x)
        ys = _axis_candidates(n.canvas_y, n.canvas_height, h, n.pitch_y, n.grid_rows,
                              boxes[:, 1], boxes[:, 1] + boxes[:, 3], y)
        if not xs.size or not ys.size:
            raise LegalizationError(f"macro {n.nodes[i].name!r} does not fit in the canvas")
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        gx, gy = gx.ravel(), gy.ravel()
        dist = (gx - x) ** 2 + (gy - y) ** 2
        order = np.lexsort((gx, gy, dist))
        chosen = None
        for s in range(0, order.size, 4096):
            idx = order[s:s + 4096]
            free = ~_hits(gx[idx], gy[idx], w, h, boxes)
            if free.any():
                chosen = idx[np.argmax(free)]
                break
        if chosen is None:
            raise LegalizationError(f"no overlap-free position found for macro {n.nodes[i].name!r}")
        out.set(i, gx[chosen], gy[chosen])
        committed.append((gx[chosen], gy[chosen], w, h))
    cells = np.flatnonzero(~n.is_macro & n.movable & p.placed)
    if cells.size:
        out.x[cells] = np.clip(p.x[cells], n.canvas_x,
                               n.canvas_x + np.clip(n.canvas_width - n.widths[cells], 0, None))
        out.y[cells] = np.clip(p.y[cells], n.canvas_y,
                               n.canvas_y + np.clip(n.canvas_height - n.heights[cells], 0, None))
    return out
