"""Netlist and placement data model plus Bookshelf (.aux/.nodes/.nets/.pl/.scl) I/O."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_GRID = (84, 84)


class BookshelfError(ValueError):
    """Malformed or incomplete Bookshelf input, reported as ``path:line: message``."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class NodeKind(str, Enum):
    MACRO = "macro"
    STANDARD_CELL = "standard_cell"
    TERMINAL = "terminal"


@dataclass(frozen=True)
class Node:
    name: str
    width: float
    height: float
    kind: NodeKind
    movable: bool = True

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"node {self.name!r} must have positive size, got {self.width}x{self.height}")
        if self.kind is NodeKind.TERMINAL and self.movable:
            raise ValueError(f"terminal {self.name!r} cannot be movable")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def is_macro(self) -> bool:
        return self.kind is NodeKind.MACRO


@dataclass(frozen=True)
class Pin:
    node: int
    dx: float = 0.0
    dy: float = 0.0


@dataclass(frozen=True)
class Net:
    name: str
    pins: tuple[Pin, ...]

    def __post_init__(self):
        if not self.pins:
            raise ValueError(f"net {self.name!r} has no pins")


class Netlist:
    """Immutable circuit: nodes, nets, canvas rectangle and placement grid.

    Pins are located at ``node center + (dx, dy)``. Flattened pin arrays in
    CSR layout (``pin_node``, ``pin_dx``, ``pin_dy``, ``net_start``) are built
    once and shared by the vectorised metric and placer code.
    """

    def __init__(
        self,
        name: str,
        nodes: Sequence[Node],
        nets: Sequence[Net],
        canvas: tuple[float, float, float, float],
        grid: tuple[int, int] = DEFAULT_GRID,
        row_height: float = 1.0,
        init_x: Sequence[float] | None = None,
        init_y: Sequence[float] | None = None,
    ):
        xl, yl, width, height = (float(v) for v in canvas)
        if not (width > 0 and height > 0):
            raise ValueError(f"canvas must be positive, got {width}x{height}")
        cols, rows = int(grid[0]), int(grid[1])
        if cols <= 0 or rows <= 0:
            raise ValueError(f"grid must be positive, got {cols}x{rows}")
        self.name = name
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.nets: tuple[Net, ...] = tuple(nets)
        self.canvas_x, self.canvas_y = xl, yl
        self.canvas_width, self.canvas_height = width, height
        self.grid_cols, self.grid_rows = cols, rows
        self.row_height = float(row_height)

        self.index: dict[str, int] = {}
        for i, node in enumerate(self.nodes):
            if node.name in self.index:
                raise ValueError(f"duplicate node name {node.name!r}")
            self.index[node.name] = i

        n = len(self.nodes)
        for net in self.nets:
            for pin in net.pins:
                if not 0 <= pin.node < n:
                    raise ValueError(f"net {net.name!r} references unknown node index {pin.node}")

        self.widths = np.array([v.width for v in self.nodes], dtype=float)
        self.heights = np.array([v.height for v in self.nodes], dtype=float)
        self.movable = np.array([v.movable for v in self.nodes], dtype=bool)
        self.is_macro = np.array([v.is_macro for v in self.nodes], dtype=bool)
        self.is_terminal = np.array([v.kind is NodeKind.TERMINAL for v in self.nodes], dtype=bool)

        counts = np.array([len(net.pins) for net in self.nets], dtype=np.int64)
        self.net_start = np.zeros(len(self.nets) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.net_start[1:])
        self.pin_node = np.array([p.node for net in self.nets for p in net.pins], dtype=np.int64)
        self.pin_dx = np.array([p.dx for net in self.nets for p in net.pins], dtype=float)
        self.pin_dy = np.array([p.dy for net in self.nets for p in net.pins], dtype=float)
        self.pin_net = np.repeat(np.arange(len(self.nets), dtype=np.int64), counts)
        self.pin_count = np.bincount(self.pin_node, minlength=n).astype(np.int64)

        if init_x is None:
            init_x = np.zeros(n)
        if init_y is None:
            init_y = np.zeros(n)
        self.init_x = np.asarray(init_x, dtype=float).copy()
        self.init_y = np.asarray(init_y, dtype=float).copy()
        for arr in (self.widths, self.heights, self.movable, self.is_macro, self.is_terminal,
                    self.net_start, self.pin_node, self.pin_dx, self.pin_dy, self.pin_net,
                    self.pin_count, self.init_x, self.init_y):
            arr.setflags(write=False)
        self._node_nets: list[np.ndarray] | None = None

    def __repr__(self) -> str:
        return (f"Netlist({self.name!r}, nodes={len(self.nodes)}, nets={len(self.nets)}, "
                f"canvas={self.canvas_width:g}x{self.canvas_height:g}, grid={self.grid_cols}x{self.grid_rows})")

    @property
    def num_pins(self) -> int:
        return int(self.net_start[-1])

    @property
    def grid(self) -> tuple[int, int]:
        return self.grid_cols, self.grid_rows

    @property
    def pitch_x(self) -> float:
        return self.canvas_width / self.grid_cols

    @property
    def pitch_y(self) -> float:
        return self.canvas_height / self.grid_rows

    def macro_indices(self, movable_only: bool = False) -> list[int]:
        mask = self.is_macro & self.movable if movable_only else self.is_macro
        return [int(i) for i in np.flatnonzero(mask)]

    def node_nets(self, i: int) -> np.ndarray:
        """Indices of nets touching node ``i`` (sorted, unique)."""
        if self._node_nets is None:
            order = np.argsort(self.pin_node, kind="stable")
            bounds = np.searchsorted(self.pin_node[order], np.arange(len(self.nodes) + 1))
            nets = self.pin_net[order]
            self._node_nets = [np.unique(nets[bounds[k]:bounds[k + 1]]) for k in range(len(self.nodes))]
        return self._node_nets[i]

    def footprint(self, i: int) -> tuple[int, int]:
        """Node size rounded up to whole grid cells."""
        return (_ceil_cells(self.widths[i] / self.pitch_x), _ceil_cells(self.heights[i] / self.pitch_y))

    def with_grid(self, cols: int, rows: int) -> "Netlist":
        return Netlist(self.name, self.nodes, self.nets,
                       (self.canvas_x, self.canvas_y, self.canvas_width, self.canvas_height),
                       (cols, rows), self.row_height, self.init_x, self.init_y)

    def with_fixed(self, fixed: Iterable[int]) -> "Netlist":
        """Copy where the given nodes are immovable (kinds unchanged)."""
        fixed = set(int(i) for i in fixed)
        nodes = [Node(v.name, v.width, v.height, v.kind, v.movable and i not in fixed)
                 for i, v in enumerate(self.nodes)]
        return Netlist(self.name, nodes, self.nets,
                       (self.canvas_x, self.canvas_y, self.canvas_width, self.canvas_height),
                       self.grid, self.row_height, self.init_x, self.init_y)

    def initial_placement(self) -> "Placement":
        return Placement(np.array(self.init_x), np.array(self.init_y), self.grid)

    def summary(self) -> str:
        macros = int(self.is_macro.sum())
        return (f"{self.name}: {len(self.nodes)} nodes, {len(self.nets)} nets, "
                f"{self.num_pins} pins, {macros} macros")


def _ceil_cells(v: float) -> int:
    # tolerate float noise such as 2.0000000001 grid cells
    return max(1, int(math.ceil(v - 1e-9)))


@dataclass
class Placement:
    """Bottom-left coordinates per node index; NaN marks an unplaced node."""

    x: np.ndarray
    y: np.ndarray
    grid: tuple[int, int] = DEFAULT_GRID

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        self.grid = (int(self.grid[0]), int(self.grid[1]))

    @classmethod
    def empty(cls, n: int, grid: tuple[int, int] = DEFAULT_GRID) -> "Placement":
        return cls(np.full(n, np.nan), np.full(n, np.nan), grid)

    def __len__(self) -> int:
        return len(self.x)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Placement):
            return NotImplemented
        return (self.grid == other.grid
                and np.array_equal(self.x, other.x, equal_nan=True)
                and np.array_equal(self.y, other.y, equal_nan=True))

    @property
    def placed(self) -> np.ndarray:
        return ~(np.isnan(self.x) | np.isnan(self.y))

    def copy(self) -> "Placement":
        return Placement(self.x.copy(), self.y.copy(), self.grid)

    def position(self, i: int) -> tuple[float, float]:
        return float(self.x[i]), float(self.y[i])

    def set(self, i: int, x: float, y: float) -> None:
        self.x[i] = x
        self.y[i] = y

    def translated(self, dx: float, dy: float) -> "Placement":
        return Placement(self.x + dx, self.y + dy, self.grid)


# ---------------------------------------------------------------------------
# Bookshelf reading


def _lines(path: str):
    """Yield (lineno, tokens) skipping blanks, comments and the UCLA header."""
    try:
        fh = open(path, "r")
    except FileNotFoundError:
        raise BookshelfError("missing file", path) from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("UCLA"):
                continue
            yield lineno, line.replace(":", " : ").split()


def _num(tok: str, path: str, lineno: int, kind=float):
    try:
        v = kind(tok)
    except ValueError:
        raise BookshelfError(f"malformed numeric field {tok!r}", path, lineno) from None
    if kind is float and not math.isfinite(v):
        raise BookshelfError(f"non-finite numeric field {tok!r}", path, lineno)
    return v


def _header_value(toks, path, lineno) -> int:
    # "NumNodes : 4"
    if len(toks) < 3 or toks[1] != ":":
        raise BookshelfError(f"malformed header line {' '.join(toks)!r}", path, lineno)
    return _num(toks[2], path, lineno, int)


def _read_aux(aux_path: str) -> dict[str, str]:
    files: dict[str, str] = {}
    base = os.path.dirname(aux_path)
    for lineno, toks in _lines(aux_path):
        if ":" not in toks:
            raise BookshelfError("expected '<Kind> : files...'", aux_path, lineno)
        for name in toks[toks.index(":") + 1:]:
            ext = os.path.splitext(name)[1].lower().lstrip(".")
            files[ext] = os.path.join(base, name)
    for ext in ("nodes", "nets", "pl", "scl"):
        if ext not in files:
            raise BookshelfError(f"aux does not reference a .{ext} file", aux_path)
        if not os.path.isfile(files[ext]):
            raise BookshelfError("missing file", files[ext])
    return files


def _read_scl(path: str) -> tuple[tuple[float, float, float, float], float]:
    rows = []
    cur: dict[str, float] | None = None
    declared = None
    for lineno, toks in _lines(path):
        key = toks[0].lower()
        if key == "numrows":
            declared = _header_value(toks, path, lineno)
        elif key == "corerow":
            cur = {"sitespacing": 1.0, "sitewidth": 1.0}
        elif key == "end":
            if cur is None:
                raise BookshelfError("End without CoreRow", path, lineno)
            for req in ("coordinate", "height", "subroworigin", "numsites"):
                if req not in cur:
                    raise BookshelfError(f"row missing {req}", path, lineno)
            rows.append(cur)
            cur = None
        elif cur is not None:
            # "SubrowOrigin : 0 NumSites : 10" carries two pairs on one line
            if len(toks) % 3 or any(toks[i + 1] != ":" for i in range(0, len(toks), 3)):
                raise BookshelfError(f"malformed row field {' '.join(toks)!r}", path, lineno)
            for i in range(0, len(toks), 3):
                name = toks[i].lower()
                if name not in ("siteorient", "sitesymmetry"):
                    cur[name] = _num(toks[i + 2], path, lineno)
    if not rows:
        raise BookshelfError("no CoreRow entries", path)
    if declared is not None and declared != len(rows):
        raise BookshelfError(f"NumRows declares {declared} rows, found {len(rows)}", path)
    xl = min(r["subroworigin"] for r in rows)
    xh = max(r["subroworigin"] + r["numsites"] * r["sitespacing"] for r in rows)
    yl = min(r["coordinate"] for r in rows)
    yh = max(r["coordinate"] + r["height"] for r in rows)
    row_height = min(r["height"] for r in rows)
    return (xl, yl, xh - xl, yh - yl), row_height


def _read_nodes(path: str):
    entries = []
    seen: dict[str, int] = {}
    declared = None
    for lineno, toks in _lines(path):
        key = toks[0].lower()
        if key == "numnodes":
            declared = _header_value(toks, path, lineno)
            continue
        if key == "numterminals":
            continue
        if len(toks) < 3:
            raise BookshelfError(f"malformed node line {' '.join(toks)!r}", path, lineno)
        name = toks[0]
        if name in seen:
            raise BookshelfError(f"duplicate node name {name!r}", path, lineno)
        seen[name] = len(entries)
        w = _num(toks[1], path, lineno)
        h = _num(toks[2], path, lineno)
        if w <= 0 or h <= 0:
            raise BookshelfError(f"node {name!r} has non-positive size", path, lineno)
        terminal = len(toks) > 3 and toks[3].lower() in ("terminal", "terminal_ni")
        entries.append((name, w, h, terminal))
    if declared is not None and declared != len(entries):
        raise BookshelfError(f"NumNodes declares {declared}, found {len(entries)}", path)
    return entries, seen


def _read_nets(path: str, index: dict[str, int]):
    nets: list[Net] = []
    declared_nets = declared_pins = None
    pending: tuple[str, int, int] | None = None  # (name, degree, lineno)
    pins: list[Pin] = []

    def close(lineno):
        name, degree, start = pending
        if len(pins) != degree:
            raise BookshelfError(f"net {name!r} declares {degree} pins, found {len(pins)}", path, start)
        nets.append(Net(name, tuple(pins)))

    for lineno, toks in _lines(path):
        key = toks[0].lower()
        if key == "numnets":
            declared_nets = _header_value(toks, path, lineno)
        elif key == "numpins":
            declared_pins = _header_value(toks, path, lineno)
        elif key == "netdegree":
            if pending is not None:
                close(lineno)
            degree = _header_value(toks, path, lineno)
            if degree < 1:
                raise BookshelfError("net with no pins", path, lineno)
            name = toks[3] if len(toks) > 3 else f"net{len(nets)}"
            pending, pins = (name, degree, lineno), []
        else:
            if pending is None:
                raise BookshelfError("pin line outside a NetDegree block", path, lineno)
            node = toks[0]
            if node not in index:
                raise BookshelfError(f"pin references unknown node {node!r}", path, lineno)
            dx = dy = 0.0
            if ":" in toks:
                k = toks.index(":")
                if len(toks) < k + 3:
                    raise BookshelfError("pin offset needs two values", path, lineno)
                dx = _num(toks[k + 1], path, lineno)
                dy = _num(toks[k + 2], path, lineno)
            pins.append(Pin(index[node], dx, dy))
    if pending is not None:
        close(None)
    if declared_nets is not None and declared_nets != len(nets):
        raise BookshelfError(f"NumNets declares {declared_nets}, found {len(nets)}", path)
    total = sum(len(n.pins) for n in nets)
    if declared_pins is not None and declared_pins != total:
        raise BookshelfError(f"NumPins declares {declared_pins}, found {total}", path)
    return nets


def _read_pl(path: str, index: dict[str, int]):
    """Return {node index: (x, y, fixed)} for each listed node."""
    out: dict[int, tuple[float, float, bool]] = {}
    for lineno, toks in _lines(path):
        if len(toks) < 3:
            raise BookshelfError(f"malformed placement line {' '.join(toks)!r}", path, lineno)
        name = toks[0]
        if name not in index:
            raise BookshelfError(f"unknown node {name!r}", path, lineno)
        x = _num(toks[1], path, lineno)
        y = _num(toks[2], path, lineno)
        fixed = any(t.upper().startswith("/FIXED") for t in toks[3:])
        out[index[name]] = (x, y, fixed)
    return out


def parse_bookshelf(aux_path: str, grid: tuple[int, int] = DEFAULT_GRID,
                    all_movable_macros: bool = False, unfix_macros: bool = False) -> Netlist:
    """Read a Bookshelf benchmark rooted at ``aux_path``.

    Nodes taller than the row height are macros; ``terminal`` nodes of row
    height or less are terminals (I/O pads). ``all_movable_macros`` treats
    every non-terminal node as a macro, for suites such as IBM that make no
    macro/cell distinction. ``unfix_macros`` makes fixed macros movable,
    which learning-based flows expect when they re-place every macro.
    """
    files = _read_aux(aux_path)
    canvas, row_height = _read_scl(files["scl"])
    entries, index = _read_nodes(files["nodes"])
    nets = _read_nets(files["nets"], index)
    pl = _read_pl(files["pl"], index)

    nodes = []
    xs = np.zeros(len(entries))
    ys = np.zeros(len(entries))
    for i, (name, w, h, terminal) in enumerate(entries):
        multi_row = h > row_height * (1 + 1e-9)
        if all_movable_macros and not terminal:
            kind = NodeKind.MACRO
        elif multi_row:
            kind = NodeKind.MACRO
        elif terminal:
            kind = NodeKind.TERMINAL
        else:
            kind = NodeKind.STANDARD_CELL
        x, y, fixed = pl.get(i, (0.0, 0.0, False))
        movable = not (terminal or fixed)
        if unfix_macros and kind is NodeKind.MACRO:
            movable = True
        if kind is NodeKind.TERMINAL:
            movable = False
        xs[i], ys[i] = x, y
        nodes.append(Node(name, w, h, kind, movable))
    missing = len(entries) - len(pl)
    if missing:
        logger.info("%d nodes absent from %s placed at (0,0)", missing, files["pl"])
    name = os.path.splitext(os.path.basename(aux_path))[0]
    return Netlist(name, nodes, nets, canvas, grid, row_height, xs, ys)


# ---------------------------------------------------------------------------
# .pl round trip


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def serialize_placement(p: Placement, n: Netlist) -> str:
    """Render ``p`` as .pl text; immovable nodes carry ``/FIXED``."""
    if len(p) != len(n.nodes):
        raise ValueError(f"placement has {len(p)} entries, netlist has {len(n.nodes)} nodes")
    missing = np.flatnonzero(~p.placed)
    if missing.size:
        raise ValueError(f"node {n.nodes[missing[0]].name!r} has no position")
    out = ["UCLA pl 1.0", ""]
    for i, node in enumerate(n.nodes):
        line = f"{node.name}\t{_fmt(p.x[i])}\t{_fmt(p.y[i])}\t: N"
        if not node.movable:
            line += " /FIXED"
        out.append(line)
    return "\n".join(out) + "\n"


def parse_placement(text: str, n: Netlist, source: str = "<pl>") -> Placement:
    """Parse .pl text against ``n``; unlisted nodes stay unplaced (NaN)."""
    p = Placement.empty(len(n.nodes), n.grid)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("UCLA"):
            continue
        toks = line.replace(":", " : ").split()
        if len(toks) < 3:
            raise BookshelfError(f"malformed placement line {line!r}", source, lineno)
        if toks[0] not in n.index:
            raise BookshelfError(f"unknown node {toks[0]!r}", source, lineno)
        p.set(n.index[toks[0]], _num(toks[1], source, lineno), _num(toks[2], source, lineno))
    return p


def read_placement(path: str, n: Netlist) -> Placement:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise BookshelfError("missing file", path) from None
    return parse_placement(text, n, source=path)


def write_bookshelf(n: Netlist, p: Placement, directory: str) -> str:
    """Write ``n`` with positions ``p`` as a Bookshelf benchmark; returns the .aux path."""
    os.makedirs(directory, exist_ok=True)
    base = os.path.join(directory, n.name)
    with open(base + ".aux", "w") as fh:
        fh.write(f"RowBasedPlacement : {n.name}.nodes {n.name}.nets {n.name}.pl {n.name}.scl\n")
    with open(base + ".nodes", "w") as fh:
        terms = sum(1 for v in n.nodes if not v.movable)
        fh.write(f"UCLA nodes 1.0\n\nNumNodes : {len(n.nodes)}\nNumTerminals : {terms}\n")
        for v in n.nodes:
            tag = "\tterminal" if v.kind is NodeKind.TERMINAL else ""
            fh.write(f"\t{v.name}\t{_fmt(v.width)}\t{_fmt(v.height)}{tag}\n")
    with open(base + ".nets", "w") as fh:
        fh.write(f"UCLA nets 1.0\n\nNumNets : {len(n.nets)}\nNumPins : {n.num_pins}\n")
        for net in n.nets:
            fh.write(f"NetDegree : {len(net.pins)} {net.name}\n")
            for pin in net.pins:
                fh.write(f"\t{n.nodes[pin.node].name}\tB : {_fmt(pin.dx)} {_fmt(pin.dy)}\n")
    with open(base + ".pl", "w") as fh:
        fh.write(serialize_placement(p, n))
    rows = max(1, int(round(n.canvas_height / n.row_height)))
    with open(base + ".scl", "w") as fh:
        fh.write(f"UCLA scl 1.0\n\nNumRows : {rows}\n\n")
        for r in range(rows):
            fh.write("CoreRow Horizontal\n"
                     f"  Coordinate : {_fmt(n.canvas_y + r * n.row_height)}\n"
                     f"  Height : {_fmt(n.row_height)}\n"
                     "  Sitewidth : 1\n  Sitespacing : 1\n  Siteorient : 1\n  Sitesymmetry : 1\n"
                     f"  SubrowOrigin : {_fmt(n.canvas_x)}\tNumSites : {_fmt(n.canvas_width)}\n"
                     "End\n")
    return base + ".aux"


def select_guidance_macros(n: Netlist, limit: int = 256) -> list[int]:
    """Movable macros by descending area, then descending pin count, then name."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    ids = n.macro_indices(movable_only=True)
    ids.sort(key=lambda i: (-n.nodes[i].area, -int(n.pin_count[i]), n.nodes[i].name))
    return ids[:limit]


def bundled_benchmark(name: str) -> str:
    """Path of a toy benchmark shipped with the package (``toy4`` or ``toy16``)."""
    path = os.path.join(os.path.dirname(__file__), "benchmarks", name, f"{name}.aux")
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no bundled benchmark {name!r}")
    return path
