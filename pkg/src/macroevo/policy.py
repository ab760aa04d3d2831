"""Sequential grid placement by a stochastic policy, with region masking.

Macros are placed one at a time on the placement grid. When a suggestion
region for the current macro admits at least one overlap-free cell, the
policy's logits are masked to that region before sampling; otherwise the
step falls back to the unconstrained (overlap-free) distribution.

Cell arrays are shaped ``(cols, rows)`` and indexed ``[cx, cy]``.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from .netlist import Netlist, Placement
from .regions import Region, SuggestionSet


class PlacementError(RuntimeError):
    pass


def order_macros_policy(n: Netlist, ids=None) -> list[int]:
    """Movable macros by descending pin count, then descending area, then name."""
    ids = n.macro_indices(movable_only=True) if ids is None else [int(i) for i in ids]
    return sorted(ids, key=lambda i: (-int(n.pin_count[i]), -n.nodes[i].area, n.nodes[i].name))


def occupancy(n: Netlist, placed: Placement, exclude=()) -> np.ndarray:
    """Grid cells whose interior is touched by an already-placed macro."""
    cols, rows = n.grid
    occ = np.zeros((cols, rows), dtype=bool)
    skip = set(int(i) for i in exclude)
    eps = 1e-9
    for i in np.flatnonzero(n.is_macro & placed.placed):
        if int(i) in skip:
            continue
        x0 = (placed.x[i] - n.canvas_x) / n.pitch_x
        y0 = (placed.y[i] - n.canvas_y) / n.pitch_y
        x1 = x0 + n.widths[i] / n.pitch_x
        y1 = y0 + n.heights[i] / n.pitch_y
        a, b = max(0, math.floor(x0 + eps)), min(cols, math.ceil(x1 - eps))
        c, d = max(0, math.floor(y0 + eps)), min(rows, math.ceil(y1 - eps))
        if a < b and c < d:
            occ[a:b, c:d] = True
    return occ


def free_cells(occ: np.ndarray, footprint: tuple[int, int]) -> np.ndarray:
    """Bottom-left cells where a ``footprint`` block fits in-grid over free cells only."""
    cols, rows = occ.shape
    fw, fh = footprint
    out = np.zeros((cols, rows), dtype=bool)
    if fw > cols or fh > rows:
        return out
    s = np.zeros((cols + 1, rows + 1), dtype=np.int64)
    s[1:, 1:] = np.cumsum(np.cumsum(occ, axis=0), axis=1)
    block = s[fw:, fh:] - s[:-fw, fh:] - s[fw:, :-fh] + s[:-fw, :-fh]
    out[:cols - fw + 1, :rows - fh + 1] = block == 0
    return out


def region_mask(region: Region, shape: tuple[int, int], footprint: tuple[int, int]) -> np.ndarray:
    cols, rows = shape
    cx = np.arange(cols)[:, None]
    cy = np.arange(rows)[None, :]
    fw, fh = footprint
    return ((region.x1 <= cx) & (cx + fw <= region.x2)) & ((region.y1 <= cy) & (cy + fh <= region.y2))


def feasible_cells(region: Region | None, n: Netlist, macro: int, placed: Placement) -> np.ndarray:
    """Boolean ``(cols, rows)`` mask of legal bottom-left cells for ``macro``.

    A cell is feasible when the macro's rounded-up footprint stays inside the
    grid, covers no cell occupied by a placed macro, and (if a region is
    given) lies entirely inside the region.
    """
    fp = n.footprint(macro)
    ok = free_cells(occupancy(n, placed, exclude=(macro,)), fp)
    if region is not None:
        ok &= region_mask(region, ok.shape, fp)
    return ok


def mask_distribution(dist: np.ndarray, feasible: np.ndarray) -> np.ndarray:
    """Zero ``dist`` outside ``feasible`` and renormalise what remains."""
    dist = np.asarray(dist, dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    if dist.shape != feasible.shape:
        raise ValueError("distribution and mask shapes differ")
    if not feasible.any():
        raise ValueError("empty feasible set; use the unconstrained fallback")
    masked = np.where(feasible, dist, 0.0)
    total = masked.sum()
    if not total > 0:
        raise ValueError("distribution has no mass on the feasible set")
    return masked / total


def softmax_masked(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, logits, -np.inf)
    top = z.max()
    if not np.isfinite(top):
        # policy gave every admissible cell zero probability
        return mask / mask.sum()
    e = np.exp(z - top)
    return e / e.sum()


class PolicyInterface(abc.ABC):
    """A distribution over bottom-left grid cells for the next macro.

    ``free`` marks the overlap-free cells; the result must sum to 1 over
    them and be zero elsewhere.
    """

    @abc.abstractmethod
    def distribution(self, n: Netlist, macro: int, placed: Placement, free: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
        ...

    def logits(self, n: Netlist, macro: int, placed: Placement, free: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.distribution(n, macro, placed, free, rng))


def _axis_delta(lo: np.ndarray, hi: np.ndarray, has: np.ndarray, centers: np.ndarray,
                off_lo: np.ndarray, off_hi: np.ndarray) -> np.ndarray:
    """Summed extent increase over nets when the macro center sits at each of ``centers``."""
    cand_lo = centers[None, :] + off_lo[:, None]
    cand_hi = centers[None, :] + off_hi[:, None]
    new = np.maximum(hi[:, None], cand_hi) - np.minimum(lo[:, None], cand_lo)
    old = np.where(has, hi - lo, 0.0)
    return (new - old[:, None]).sum(axis=0)


def hpwl_delta(n: Netlist, macro: int, placed: Placement) -> np.ndarray:
    """Wirelength increase of placing ``macro`` at each grid cell, ``(cols, rows)``.

    Only pins of already-placed nodes count toward the existing net boxes.
    The increase is separable into x and y parts.
    """
    cols, rows = n.grid
    nets = n.node_nets(macro)
    if not nets.size:
        return np.zeros((cols, rows))
    lo_x, hi_x, lo_y, hi_y, has = [], [], [], [], []
    off = []
    for e in nets:
        s, t = n.net_start[e], n.net_start[e + 1]
        node = n.pin_node[s:t]
        mine = node == macro
        other = ~mine & placed.placed[node]
        px = placed.x[node[other]] + 0.5 * n.widths[node[other]] + n.pin_dx[s:t][other]
        py = placed.y[node[other]] + 0.5 * n.heights[node[other]] + n.pin_dy[s:t][other]
        has.append(bool(other.any()))
        lo_x.append(px.min() if px.size else np.inf)
        hi_x.append(px.max() if px.size else -np.inf)
        lo_y.append(py.min() if py.size else np.inf)
        hi_y.append(py.max() if py.size else -np.inf)
        dx, dy = n.pin_dx[s:t][mine], n.pin_dy[s:t][mine]
        off.append((dx.min(), dx.max(), dy.min(), dy.max()))
    off = np.array(off)
    has = np.array(has)
    cx = n.canvas_x + n.pitch_x * np.arange(cols) + 0.5 * n.widths[macro]
    cy = n.canvas_y + n.pitch_y * np.arange(rows) + 0.5 * n.heights[macro]
    ddx = _axis_delta(np.array(lo_x), np.array(hi_x), has, cx, off[:, 0], off[:, 1])
    ddy = _axis_delta(np.array(lo_y), np.array(hi_y), has, cy, off[:, 2], off[:, 3])
    return ddx[:, None] + ddy[None, :]


class BaselinePolicy(PolicyInterface):
    """Greedy wirelength policy: probability proportional to ``exp(-beta * dHPWL)``.

    ``beta`` is in inverse canvas units; ``beta=0`` is uniform over free cells.
    """

    def __init__(self, beta: float = 1.0):
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.beta = float(beta)

    def logits(self, n, macro, placed, free, rng=None):
        if self.beta == 0:
            return np.zeros(free.shape)
        return -self.beta * hpwl_delta(n, macro, placed)

    def distribution(self, n, macro, placed, free, rng=None):
        return softmax_masked(self.logits(n, macro, placed, free, rng), free)


@dataclass
class StepRecord:
    macro: int
    region: Region | None
    feasible_count: int  # cells admitted by the region, 0 when no region
    cell: tuple[int, int]
    fallback: bool


@dataclass
class RolloutResult:
    placement: Placement
    fallback_count: int
    steps: list[StepRecord] = field(default_factory=list)


def rollout(policy: PolicyInterface, n: Netlist, suggestions: SuggestionSet | None = None,
            seed: int = 0, init: Placement | None = None) -> RolloutResult:
    """Place every movable macro in policy order; standard cells stay unplaced.

    Immovable nodes keep their positions from ``init`` (default: the netlist's)
    and act as obstacles from the first step.
    """
    rng = np.random.default_rng(seed)
    base = init if init is not None else n.initial_placement()
    placed = Placement.empty(len(n.nodes), n.grid)
    fixed = ~n.movable
    placed.x[fixed] = base.x[fixed]
    placed.y[fixed] = base.y[fixed]
    steps: list[StepRecord] = []
    fallbacks = 0
    regions = suggestions.regions if suggestions else {}
    for m in order_macros_policy(n):
        free = feasible_cells(None, n, m, placed)
        if not free.any():
            raise PlacementError(f"no overlap-free position left for macro {n.nodes[m].name!r}")
        logits = policy.logits(n, m, placed, free, rng)
        region = regions.get(m)
        feasible_count = 0
        fallback = False
        mask = free
        if region is not None:
            inside = free & region_mask(region, free.shape, n.footprint(m))
            feasible_count = int(inside.sum())
            if feasible_count:
                mask = inside
            else:
                fallback = True
                fallbacks += 1
        probs = softmax_masked(logits, mask)
        k = int(rng.choice(probs.size, p=probs.ravel()))
        cx, cy = divmod(k, probs.shape[1])
        placed.set(m, n.canvas_x + cx * n.pitch_x, n.canvas_y + cy * n.pitch_y)
        steps.append(StepRecord(m, region, feasible_count, (cx, cy), fallback))
    return RolloutResult(placed, fallbacks, steps)
