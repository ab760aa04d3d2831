"""Suggested macro regions: types, validation, anchor conversion and text parsing."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

from .netlist import Netlist, Node, select_guidance_macros

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Region:
    """Half-open box of grid cells ``[x1, x2) x [y1, y2)``."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if int(v) != v:
                raise ValueError(f"region coordinates must be integers, got {v!r}")
        if not (0 <= self.x1 < self.x2 and 0 <= self.y1 < self.y2):
            raise ValueError(f"degenerate region {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    def contains_cell(self, cx: int, cy: int, fw: int = 1, fh: int = 1) -> bool:
        """Whether a ``fw x fh`` footprint with bottom-left cell ``(cx, cy)`` fits inside."""
        return self.x1 <= cx and cx + fw <= self.x2 and self.y1 <= cy and cy + fh <= self.y2


@dataclass
class SuggestionSet:
    regions: dict[int, Region] = field(default_factory=dict)
    candidate_index: int | None = None
    source: str = "mock"  # "mock" or "remote"

    def __post_init__(self):
        if self.source not in ("mock", "remote"):
            raise ValueError(f"unknown suggestion source {self.source!r}")

    def __len__(self) -> int:
        return len(self.regions)

    def __bool__(self) -> bool:
        return bool(self.regions)

    def get(self, macro: int) -> Region | None:
        return self.regions.get(macro)


def macro_cells(macro: Node, pitch: tuple[float, float] = (1.0, 1.0)) -> tuple[int, int]:
    # same tolerance as Netlist.footprint
    return (max(1, int(math.ceil(macro.width / pitch[0] - 1e-9))),
            max(1, int(math.ceil(macro.height / pitch[1] - 1e-9))))


def validate_suggestion(region: Region, macro: Node, grid: tuple[int, int],
                        pitch: tuple[float, float] = (1.0, 1.0)) -> str | None:
    """Return None when ``region`` can hold ``macro`` inside the grid, else the reason."""
    cols, rows = grid
    if region.x2 > cols or region.y2 > rows:
        return f"region {region.as_tuple()} exceeds the {cols}x{rows} grid"
    fw, fh = macro_cells(macro, pitch)
    if region.width < fw or region.height < fh:
        return f"region {region.width}x{region.height} too small for {macro.name} ({fw}x{fh} cells)"
    return None


def validate_for(region: Region, n: Netlist, macro: int) -> str | None:
    return validate_suggestion(region, n.nodes[macro], n.grid, (n.pitch_x, n.pitch_y))


def region_to_anchor(region: Region, pitch: tuple[float, float] = (1.0, 1.0),
                     origin: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
    """Bottom-left corner of the region in canvas units."""
    return (origin[0] + region.x1 * pitch[0], origin[1] + region.y1 * pitch[1])


def anchor_for(region: Region, n: Netlist) -> tuple[float, float]:
    return region_to_anchor(region, (n.pitch_x, n.pitch_y), (n.canvas_x, n.canvas_y))


def _size(v: float) -> str:
    return f"{round(v, 1):g}"


def format_region_line(name: str, size: tuple[float, float], region: Region, sep: str = "and") -> str:
    return (f"{name} ({_size(size[0])} x {_size(size[1])}): "
            f"({region.x1},{region.y1}) {sep} ({region.x2},{region.y2})")


_LINE = re.compile(
    r"(?P<name>[^\s:()`*]+)\s*\(\s*[\d.]+\s*[xX×]\s*[\d.]+\s*\)\s*:\s*"
    r"\(\s*(?P<x1>-?\d+)\s*,\s*(?P<y1>-?\d+)\s*\)\s*(?:and|to)\s*"
    r"\(\s*(?P<x2>-?\d+)\s*,\s*(?P<y2>-?\d+)\s*\)"
)


def parse_response(text: str, n: Netlist, grid: tuple[int, int] | None = None,
                   eligible=None, candidate_index: int | None = None,
                   source: str = "remote") -> tuple[SuggestionSet, list[str]]:
    """Extract ``NAME (W x H): (x1,y1) and|to (x2,y2)`` lines into a SuggestionSet.

    Lines naming macros outside ``eligible`` (default: the guidance macros)
    or carrying invalid regions are dropped with a warning; for repeated
    names the first occurrence wins. Never raises on content.
    """
    grid = tuple(grid) if grid is not None else n.grid
    pitch = (n.canvas_width / grid[0], n.canvas_height / grid[1])
    allowed = set(select_guidance_macros(n) if eligible is None else eligible)
    regions: dict[int, Region] = {}
    warnings: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        for m in _LINE.finditer(line):
            name = m.group("name")
            i = n.index.get(name)
            if i is None or i not in allowed:
                warnings.append(f"line {lineno}: unknown macro {name!r}")
                continue
            if i in regions:
                warnings.append(f"line {lineno}: duplicate suggestion for {name!r} ignored")
                continue
            x1, y1, x2, y2 = (int(m.group(k)) for k in ("x1", "y1", "x2", "y2"))
            try:
                region = Region(x1, y1, x2, y2)
            except ValueError as exc:
                warnings.append(f"line {lineno}: {name}: {exc}")
                continue
            reason = validate_suggestion(region, n.nodes[i], grid, pitch)
            if reason is not None:
                warnings.append(f"line {lineno}: {name}: {reason}")
                continue
            regions[i] = region
    for w in warnings:
        log.warning("suggestion parse: %s", w)
    return SuggestionSet(regions, candidate_index, source), warnings
