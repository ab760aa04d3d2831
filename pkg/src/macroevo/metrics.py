"""Placement quality metrics: HPWL, macro overlap and RUDY congestion."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .netlist import Net, Netlist, Placement


class UnplacedNodeError(ValueError):
    pass


def pin_positions(n: Netlist, p: Placement) -> tuple[np.ndarray, np.ndarray]:
    """Absolute pin coordinates (node center plus offset) in CSR pin order."""
    node = n.pin_node
    px = p.x[node] + 0.5 * n.widths[node] + n.pin_dx
    py = p.y[node] + 0.5 * n.heights[node] + n.pin_dy
    return px, py


def _check_placed(n: Netlist, p: Placement, nodes: np.ndarray) -> None:
    bad = nodes[~p.placed[nodes]]
    if bad.size:
        raise UnplacedNodeError(f"node {n.nodes[int(bad[0])].name!r} is not placed")


def net_hpwl(net: Net, n: Netlist, p: Placement) -> float:
    xs, ys = [], []
    for pin in net.pins:
        if not p.placed[pin.node]:
            raise UnplacedNodeError(f"net {net.name!r}: node {n.nodes[pin.node].name!r} is not placed")
        xs.append(p.x[pin.node] + 0.5 * n.widths[pin.node] + pin.dx)
        ys.append(p.y[pin.node] + 0.5 * n.heights[pin.node] + pin.dy)
    return float((max(xs) - min(xs)) + (max(ys) - min(ys)))


def net_extents(n: Netlist, p: Placement, pin_mask: np.ndarray | None = None):
    """Per-net (xmin, xmax, ymin, ymax, pin count) over the pins selected by ``pin_mask``."""
    px, py = pin_positions(n, p)
    if pin_mask is None:
        counts = np.diff(n.net_start)
    else:
        px = np.where(pin_mask, px, np.nan)
        py = np.where(pin_mask, py, np.nan)
        counts = np.add.reduceat(pin_mask.astype(np.int64), n.net_start[:-1]) if len(n.nets) else np.zeros(0, int)
    if not len(n.nets):
        z = np.zeros(0)
        return z, z, z, z, np.zeros(0, dtype=np.int64)
    starts = n.net_start[:-1]
    hi_x = np.where(np.isnan(px), -np.inf, px)
    lo_x = np.where(np.isnan(px), np.inf, px)
    hi_y = np.where(np.isnan(py), -np.inf, py)
    lo_y = np.where(np.isnan(py), np.inf, py)
    return (np.minimum.reduceat(lo_x, starts), np.maximum.reduceat(hi_x, starts),
            np.minimum.reduceat(lo_y, starts), np.maximum.reduceat(hi_y, starts), counts)


def per_net_hpwl(n: Netlist, p: Placement, macros_only: bool = False) -> np.ndarray:
    if not len(n.nets):
        return np.zeros(0)
    if macros_only:
        mask = n.is_macro[n.pin_node]
        _check_placed(n, p, n.pin_node[mask])
    else:
        mask = None
        _check_placed(n, p, n.pin_node)
    xl, xh, yl, yh, cnt = net_extents(n, p, mask)
    out = (xh - xl) + (yh - yl)
    return np.where(cnt > 0, out, 0.0)


def total_hpwl(n: Netlist, p: Placement, macros_only: bool = False) -> float:
    """Sum of per-net bounding-box half perimeters.

    ``math.fsum`` makes the total independent of reduction order. With
    ``macros_only`` only macro pins count, the reward used on the policy
    track when standard cells are not yet placed.
    """
    return math.fsum(per_net_hpwl(n, p, macros_only).tolist())


def overlap_area(n: Netlist, p: Placement, nodes=None) -> float:
    """Total pairwise intersection area among macros (or the given node ids)."""
    ids = np.flatnonzero(n.is_macro) if nodes is None else np.asarray(nodes, dtype=np.int64)
    ids = ids[p.placed[ids]]
    if ids.size < 2:
        return 0.0
    x0, y0 = p.x[ids], p.y[ids]
    x1, y1 = x0 + n.widths[ids], y0 + n.heights[ids]
    total = []
    chunk = 512
    for s in range(0, ids.size, chunk):
        e = min(s + chunk, ids.size)
        ox = np.minimum(x1[s:e, None], x1[None, :]) - np.maximum(x0[s:e, None], x0[None, :])
        oy = np.minimum(y1[s:e, None], y1[None, :]) - np.maximum(y0[s:e, None], y0[None, :])
        inter = np.clip(ox, 0, None) * np.clip(oy, 0, None)
        # keep only pairs i < j
        rows = np.arange(s, e)[:, None]
        inter = np.where(np.arange(ids.size)[None, :] > rows, inter, 0.0)
        total.append(inter.sum(axis=1))
    return math.fsum(np.concatenate(total).tolist())


def _axis_overlap(lo: np.ndarray, hi: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Length of [lo, hi] inside each bin [edges[k], edges[k+1]]; shape (len(lo), bins)."""
    return np.clip(np.minimum(hi[:, None], edges[None, 1:]) - np.maximum(lo[:, None], edges[None, :-1]), 0, None)


def _clamp_box(lo, hi, pitch, canvas_lo, canvas_len):
    """Widen boxes to at least one pitch around their center, shifted back inside the canvas."""
    widened = (hi - lo) < pitch
    size = np.maximum(hi - lo, pitch)
    lo = 0.5 * (lo + hi) - 0.5 * size
    # boxes that were widened must not lose demand past the canvas edge
    shifted = np.clip(lo, canvas_lo, canvas_lo + canvas_len - pitch)
    lo = np.where(widened, shifted, lo)
    return lo, lo + size, size


def rudy_map(n: Netlist, p: Placement, bins: tuple[int, int] | None = None) -> np.ndarray:
    """Rectangular uniform wire density, shape ``(bins_x, bins_y)`` indexed ``[ix, iy]``.

    Each multi-pin net spreads density ``(w + h) / (w * h)`` uniformly over its
    bounding box, with ``w`` and ``h`` clamped to one bin pitch; a bin holds the
    area-weighted average density over it. Hence ``sum(map) * bin_area`` equals
    the summed clamped half perimeters for boxes inside the canvas.
    """
    bx, by = bins if bins is not None else n.grid
    if bx <= 0 or by <= 0:
        raise ValueError("bins must be positive")
    out = np.zeros((bx, by))
    if not len(n.nets):
        return out
    xl, xh, yl, yh, cnt = net_extents(n, p)
    _check_placed(n, p, n.pin_node)
    keep = cnt >= 2
    xl, xh, yl, yh = xl[keep], xh[keep], yl[keep], yh[keep]
    if not xl.size:
        return out
    pitch_x = n.canvas_width / bx
    pitch_y = n.canvas_height / by
    xl, xh, w = _clamp_box(xl, xh, pitch_x, n.canvas_x, n.canvas_width)
    yl, yh, h = _clamp_box(yl, yh, pitch_y, n.canvas_y, n.canvas_height)
    density = (w + h) / (w * h)
    ex = n.canvas_x + pitch_x * np.arange(bx + 1)
    ey = n.canvas_y + pitch_y * np.arange(by + 1)
    chunk = max(1, 2_000_000 // max(bx, by))
    for s in range(0, xl.size, chunk):
        e = s + chunk
        ox = _axis_overlap(xl[s:e], xh[s:e], ex) * density[s:e, None]
        oy = _axis_overlap(yl[s:e], yh[s:e], ey)
        out += ox.T @ oy
    return out / (pitch_x * pitch_y)


@dataclass
class MetricReport:
    total_hpwl: float
    overlap_area: float
    rudy_max: float
    rudy_map: np.ndarray

    def to_record(self) -> dict:
        return {"total_hpwl": self.total_hpwl, "overlap_area": self.overlap_area, "rudy_max": self.rudy_max}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.to_record()), lineterminator="\n")
        w.writeheader()
        w.writerow(self.to_record())
        return buf.getvalue()


def evaluate(n: Netlist, p: Placement, bins: tuple[int, int] | None = None,
             macros_only: bool = False) -> MetricReport:
    rmap = rudy_map(n, p, bins)
    return MetricReport(total_hpwl(n, p, macros_only), overlap_area(n, p),
                        float(rmap.max()) if rmap.size else 0.0, rmap)
