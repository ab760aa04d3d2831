"""Gradient-based analytical placement with an optional quadratic anchor term.

The objective is ``WL_gamma + lambda_density * D + lambda_anchor * A`` where
``WL_gamma`` is log-sum-exp smoothed wirelength, ``D`` a quadratic bin
overflow penalty and ``A`` the summed squared distance of anchored macros to
their targets. It is minimised with Nesterov's method using a Lipschitz
step-size estimate, in the style of ePlace/DREAMPlace.

Positions are ``(N, 2)`` arrays of bottom-left corners indexed by node id.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .netlist import Netlist, Placement

# Density/iteration settings per benchmark: target density, stop overflow,
# initial density weight, bins (x, y), iterations.
BENCHMARK_PARAMS = {
    **{f"superblue{k}": (1.0, 0.10, 8e-5, b, 1000)
       for k, b in [(1, 1024), (3, 2048), (4, 512), (5, 1024), (7, 512), (10, 1024), (16, 1024), (18, 512)]},
    "adaptec1": (1.0, 0.07, 8e-5, 512, 1000),
    "adaptec2": (1.0, 0.07, 8e-5, 1024, 1000),
    "adaptec3": (1.0, 0.07, 8e-5, 1024, 1000),
    "adaptec4": (1.0, 0.07, 8e-5, 1024, 1000),
    **{f"ibm0{k}": (1.0, 0.07, 8e-5, 512, 1000) for k in range(1, 5)},
    "ariane133": (1.0, 0.07, 8e-5, 512, 1000),
    "ariane136": (1.0, 0.07, 8e-5, 512, 1000),
}
ANCHOR_WEIGHTS = {"superblue10": 0.001}
DEFAULT_ANCHOR_WEIGHT = 0.01


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, value: float):
        self.iteration = iteration
        super().__init__(f"objective became non-finite ({value}) at iteration {iteration}")


@dataclass(frozen=True)
class PlacerConfig:
    lambda_density: float = 8e-5
    lambda_anchor: float = DEFAULT_ANCHOR_WEIGHT
    target_density: float = 1.0
    bins: tuple[int, int] | None = None  # None: use the netlist grid
    max_iterations: int = 1000
    min_iterations: int = 100
    stop_overflow: float = 0.07
    learning_rate: float = 0.01
    # (start, end, mode) in bin pitches; mode is geometric, linear or constant
    gamma_schedule: tuple[float, float, str] = (5.0, 0.1, "geometric")
    # per-iteration multiplier on the density weight, which is first
    # normalised so its gradient has the wirelength gradient's L1 norm
    density_weight_growth: float = 1.05
    normalize_density_weight: bool = True
    seed: int = 0

    def __post_init__(self):
        errors = []
        if self.lambda_density < 0 or self.lambda_anchor < 0:
            errors.append("weights must be >= 0")
        if not 0 < self.target_density <= 1:
            errors.append("target_density must be in (0, 1]")
        if self.bins is not None and (len(self.bins) != 2 or min(self.bins) < 1):
            errors.append("bins must be two positive integers")
        if self.max_iterations < 0 or self.min_iterations < 0:
            errors.append("iteration counts must be >= 0")
        if not 0 < self.stop_overflow < 1:
            errors.append("stop_overflow must be in (0, 1)")
        if not self.learning_rate > 0:
            errors.append("learning_rate must be positive")
        g0, g1, mode = self.gamma_schedule
        if not g0 >= g1 > 0:
            errors.append("gamma_schedule needs start >= end > 0")
        if mode not in ("geometric", "linear", "constant"):
            errors.append(f"unknown gamma anneal mode {mode!r}")
        if self.density_weight_growth <= 0:
            errors.append("density_weight_growth must be positive")
        if errors:
            raise ValueError("invalid PlacerConfig: " + "; ".join(errors))

    @classmethod
    def for_benchmark(cls, name: str, **overrides) -> "PlacerConfig":
        """Defaults for a known benchmark; unknown names get the generic defaults."""
        kw = {"lambda_anchor": ANCHOR_WEIGHTS.get(name, DEFAULT_ANCHOR_WEIGHT)}
        if name in BENCHMARK_PARAMS:
            td, so, dw, b, it = BENCHMARK_PARAMS[name]
            kw.update(target_density=td, stop_overflow=so, lambda_density=dw, bins=(b, b), max_iterations=it)
        kw.update(overrides)
        return cls(**kw)

    def with_seed(self, seed: int) -> "PlacerConfig":
        return replace(self, seed=int(seed))

    def gamma(self, iteration: int) -> float:
        g0, g1, mode = self.gamma_schedule
        if mode == "constant" or self.max_iterations <= 1:
            return g0
        t = min(1.0, iteration / (self.max_iterations - 1))
        if mode == "linear":
            return g0 + (g1 - g0) * t
        return g0 * (g1 / g0) ** t


@dataclass
class AnchorSet:
    """Target bottom-left points for macros, keyed by node id."""

    targets: dict[int, tuple[float, float]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.targets)

    def __bool__(self) -> bool:
        return bool(self.targets)

    def validate(self, n: Netlist) -> None:
        x0, y0 = n.canvas_x, n.canvas_y
        x1, y1 = x0 + n.canvas_width, y0 + n.canvas_height
        for i, (ax, ay) in self.targets.items():
            if not (0 <= i < len(n.nodes)) or not n.nodes[i].is_macro:
                raise ValueError(f"anchor for unknown macro id {i}")
            if not (x0 <= ax <= x1 and y0 <= ay <= y1):
                raise ValueError(f"anchor for {n.nodes[i].name!r} lies outside the canvas")


# ---------------------------------------------------------------------------
# objective terms


def _check_finite(pos: np.ndarray) -> None:
    if not np.all(np.isfinite(pos)):
        raise ValueError("positions must be finite")


def _lse_axis(c: np.ndarray, n: Netlist, gamma: float):
    """Per-net smoothed extent and per-pin derivatives for one axis."""
    starts = n.net_start[:-1]
    hi = np.maximum.reduceat(c, starts)
    lo = np.minimum.reduceat(c, starts)
    ep = np.exp((c - hi[n.pin_net]) / gamma)
    em = np.exp((lo[n.pin_net] - c) / gamma)
    sp = np.add.reduceat(ep, starts)
    sm = np.add.reduceat(em, starts)
    value = (hi + gamma * np.log(sp)) - (lo - gamma * np.log(sm))
    dpin = ep / sp[n.pin_net] - em / sm[n.pin_net]
    return value, dpin


def smoothed_wirelength(n: Netlist, pos: np.ndarray, gamma: float) -> tuple[float, np.ndarray]:
    """Log-sum-exp wirelength: per net and axis ``gamma*(log sum e^(c/gamma) + log sum e^(-c/gamma))``.

    Returns the value and its gradient with respect to node positions;
    immovable nodes get zero gradient.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    pos = np.asarray(pos, dtype=float)
    _check_finite(pos)
    grad = np.zeros_like(pos)
    if not len(n.nets):
        return 0.0, grad
    node = n.pin_node
    cx = pos[node, 0] + 0.5 * n.widths[node] + n.pin_dx
    cy = pos[node, 1] + 0.5 * n.heights[node] + n.pin_dy
    vx, dx = _lse_axis(cx, n, gamma)
    vy, dy = _lse_axis(cy, n, gamma)
    grad[:, 0] = np.bincount(node, weights=dx, minlength=len(pos))
    grad[:, 1] = np.bincount(node, weights=dy, minlength=len(pos))
    grad[~n.movable] = 0.0
    return math.fsum(vx.tolist()) + math.fsum(vy.tolist()), grad


def _q(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    # antiderivative of clamp(v, 0, w)
    vc = np.clip(v, 0, w)
    return 0.5 * vc * vc + w * np.clip(v - w, 0, None)


def _smooth_overlap(lo: np.ndarray, w: np.ndarray, edges: np.ndarray, pitch: float):
    """Overlap of [lo, lo+w] blurred by a one-bin box kernel with each bin; plus d/d(lo)."""
    h = 0.5 * pitch
    w2 = w[:, None]

    def s(u):
        return (_q(u + h, w2) - _q(u - h, w2)) / pitch

    def ds(u):
        return (np.clip(u + h, 0, w2) - np.clip(u - h, 0, w2)) / pitch

    ua = edges[None, :-1] - lo[:, None]
    ub = edges[None, 1:] - lo[:, None]
    return s(ub) - s(ua), ds(ua) - ds(ub)


def _bins(n: Netlist, cfg: PlacerConfig) -> tuple[int, int]:
    return tuple(cfg.bins) if cfg.bins is not None else n.grid


def _bin_geometry(n: Netlist, bins):
    nx, ny = bins
    px, py = n.canvas_width / nx, n.canvas_height / ny
    ex = n.canvas_x + px * np.arange(nx + 1)
    ey = n.canvas_y + py * np.arange(ny + 1)
    return px, py, ex, ey


def density_map(n: Netlist, pos: np.ndarray, bins: tuple[int, int], smooth: bool = True) -> np.ndarray:
    """Occupied area per bin, ``(nx, ny)``; terminals do not occupy area."""
    px, py, ex, ey = _bin_geometry(n, bins)
    ids = np.flatnonzero(~n.is_terminal)
    rho = np.zeros(bins)
    for s in range(0, ids.size, 4096):
        sub = ids[s:s + 4096]
        if smooth:
            ox, _ = _smooth_overlap(pos[sub, 0], n.widths[sub], ex, px)
            oy, _ = _smooth_overlap(pos[sub, 1], n.heights[sub], ey, py)
        else:
            ox = np.clip(np.minimum(pos[sub, 0, None] + n.widths[sub, None], ex[None, 1:])
                         - np.maximum(pos[sub, 0, None], ex[None, :-1]), 0, None)
            oy = np.clip(np.minimum(pos[sub, 1, None] + n.heights[sub, None], ey[None, 1:])
                         - np.maximum(pos[sub, 1, None], ey[None, :-1]), 0, None)
        rho += ox.T @ oy
    return rho


def density_penalty(n: Netlist, pos: np.ndarray, cfg: PlacerConfig) -> tuple[float, np.ndarray]:
    """``sum_b max(0, rho_b - target * bin_area)^2`` over smoothed bin densities."""
    pos = np.asarray(pos, dtype=float)
    _check_finite(pos)
    bins = _bins(n, cfg)
    px, py, ex, ey = _bin_geometry(n, bins)
    bin_area = px * py
    if not bin_area > 0:
        raise ValueError("zero-area bins")
    ids = np.flatnonzero(~n.is_terminal)
    chunks = []
    rho = np.zeros(bins)
    for s in range(0, ids.size, 4096):
        sub = ids[s:s + 4096]
        ox, dox = _smooth_overlap(pos[sub, 0], n.widths[sub], ex, px)
        oy, doy = _smooth_overlap(pos[sub, 1], n.heights[sub], ey, py)
        rho += ox.T @ oy
        chunks.append((sub, ox, dox, oy, doy))
    over = np.clip(rho - cfg.target_density * bin_area, 0, None)
    value = math.fsum((over * over).ravel().tolist())
    grad = np.zeros_like(pos)
    g = 2.0 * over
    for sub, ox, dox, oy, doy in chunks:
        grad[sub, 0] = np.sum(dox * (oy @ g.T), axis=1)
        grad[sub, 1] = np.sum(doy * (ox @ g), axis=1)
    grad[~n.movable] = 0.0
    return value, grad


def overflow(n: Netlist, pos: np.ndarray, cfg: PlacerConfig) -> float:
    """Fraction of occupied area above the per-bin target (exact, unsmoothed density)."""
    bins = _bins(n, cfg)
    px, py, _, _ = _bin_geometry(n, bins)
    rho = density_map(n, np.asarray(pos, dtype=float), bins, smooth=False)
    total = rho.sum()
    if total <= 0:
        return 0.0
    return float(np.clip(rho - cfg.target_density * px * py, 0, None).sum() / total)


def anchor_term(pos: np.ndarray, anchors: AnchorSet | Mapping[int, tuple[float, float]]):
    """Quadratic pull ``sum_i ||x_i - target_i||^2`` over anchored macros."""
    targets = anchors.targets if isinstance(anchors, AnchorSet) else dict(anchors)
    pos = np.asarray(pos, dtype=float)
    grad = np.zeros_like(pos)
    if not targets:
        return 0.0, grad
    ids = np.array(sorted(targets), dtype=np.int64)
    if ids.min() < 0 or ids.max() >= len(pos):
        raise ValueError("anchor for unknown node id")
    tgt = np.array([targets[i] for i in ids], dtype=float)
    diff = pos[ids] - tgt
    grad[ids] = 2.0 * diff
    return math.fsum((diff * diff).ravel().tolist()), grad


# ---------------------------------------------------------------------------
# solver


@dataclass
class TraceRow:
    iteration: int
    wl: float
    density: float
    anchor: float
    overflow: float
    objective: float
    gamma: float


@dataclass
class SolveResult:
    placement: Placement
    trace: list[TraceRow]
    stopped_on_overflow: bool
    positions: list[np.ndarray] = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "wl", "density", "anchor", "overflow"])
        for r in self.trace:
            w.writerow([r.iteration, repr(r.wl), repr(r.density), repr(r.anchor), repr(r.overflow)])
        return buf.getvalue()


def objective(n: Netlist, pos: np.ndarray, cfg: PlacerConfig, anchors: AnchorSet | None,
              gamma: float, lambda_density: float):
    wl, g_wl = smoothed_wirelength(n, pos, gamma)
    if lambda_density > 0:
        d, g_d = density_penalty(n, pos, cfg)
    else:
        d, g_d = 0.0, 0.0
    if anchors:
        a, g_a = anchor_term(pos, anchors)
    else:
        a, g_a = 0.0, 0.0
    value = wl + lambda_density * d + cfg.lambda_anchor * a
    grad = g_wl + lambda_density * g_d + cfg.lambda_anchor * g_a
    return value, grad, (wl, d, a)


def random_init(n: Netlist, seed: int) -> Placement:
    """Movable nodes uniform in the canvas; immovable nodes keep their netlist position."""
    rng = np.random.default_rng(seed)
    p = n.initial_placement()
    mov = np.flatnonzero(n.movable)
    span_x = np.clip(n.canvas_width - n.widths[mov], 0, None)
    span_y = np.clip(n.canvas_height - n.heights[mov], 0, None)
    p.x[mov] = n.canvas_x + rng.random(mov.size) * span_x
    p.y[mov] = n.canvas_y + rng.random(mov.size) * span_y
    return p


def solve(n: Netlist, cfg: PlacerConfig, anchors: AnchorSet | None = None,
          init: Placement | None = None, fixed: Iterable[int] = (),
          record_positions: bool = False) -> SolveResult:
    """Minimise the (anchored) objective from ``init`` or a seeded random start.

    ``fixed`` pins extra nodes in place, e.g. legal macros while standard
    cells are placed around them. Returns the unlegalised placement and a
    per-iteration trace.
    """
    if anchors:
        anchors.validate(n)
    if fixed:
        n = n.with_fixed(fixed)
    p0 = init.copy() if init is not None else random_init(n, cfg.seed)
    if not np.all(p0.placed):
        base = random_init(n, cfg.seed)
        p0.x = np.where(np.isnan(p0.x), base.x, p0.x)
        p0.y = np.where(np.isnan(p0.y), base.y, p0.y)
    pos = np.stack([p0.x, p0.y], axis=1)
    mov = n.movable
    lo = np.stack([np.full(len(pos), n.canvas_x), np.full(len(pos), n.canvas_y)], axis=1)
    hi = np.stack([n.canvas_x + np.clip(n.canvas_width - n.widths, 0, None),
                   n.canvas_y + np.clip(n.canvas_height - n.heights, 0, None)], axis=1)

    def project(x):
        out = np.clip(x, lo, hi)
        out[~mov] = pos[~mov]
        return out

    bins = _bins(n, cfg)
    pitch = 0.5 * (n.canvas_width / bins[0] + n.canvas_height / bins[1])
    max_disp = 0.1 * max(n.canvas_width, n.canvas_height)

    trace: list[TraceRow] = []
    history: list[np.ndarray] = []
    v = project(pos)
    u_prev = v.copy()
    v_prev = g_prev = None
    a = 1.0
    step = None
    stopped = False
    result = v
    scale = None if cfg.normalize_density_weight else 1.0
    k0 = 0
    for k in range(cfg.max_iterations):
        gamma = cfg.gamma(k) * pitch
        if scale is None and cfg.lambda_density > 0:
            # calibrate once density first pushes back
            _, g_wl = smoothed_wirelength(n, v, gamma)
            _, g_d = density_penalty(n, v, cfg)
            norm_d = float(np.abs(g_d).sum())
            if norm_d > 0:
                scale, k0 = float(np.abs(g_wl).sum()) / norm_d, k
        if scale is None:
            lam_d = cfg.lambda_density
        else:
            lam_d = cfg.lambda_density * scale * cfg.density_weight_growth ** (k - k0)
        value, grad, (wl, d, an) = objective(n, v, cfg, anchors, gamma, lam_d)
        if not math.isfinite(value) or not np.all(np.isfinite(grad)):
            raise DivergenceError(k, value)
        of = overflow(n, v, cfg)
        trace.append(TraceRow(k, wl, d, an, of, value, gamma))
        if record_positions:
            history.append(v.copy())
        if k >= cfg.min_iterations and of <= cfg.stop_overflow:
            stopped = True
            result = v
            break
        gmax = float(np.abs(grad[mov]).max()) if mov.any() else 0.0
        if gmax == 0.0:
            result = v
            break
        if step is None:
            step = cfg.learning_rate * pitch / gmax
        else:
            dg = np.linalg.norm(grad - g_prev)
            if dg > 0:
                step = np.linalg.norm(v - v_prev) / dg
        step = min(step, max_disp / gmax)
        u = project(v - step * grad)
        if np.vdot(grad, u - u_prev) > 0:
            # gradient-based momentum restart
            a = 1.0
        a_next = 0.5 * (1.0 + math.sqrt(4.0 * a * a + 1.0))
        v_prev, g_prev = v, grad
        v = project(u + ((a - 1.0) / a_next) * (u - u_prev))
        u_prev, a = u, a_next
        result = u
    out = Placement(result[:, 0].copy(), result[:, 1].copy(), n.grid)
    return SolveResult(out, trace, stopped, history)
