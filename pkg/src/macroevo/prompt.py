"""Multimodal prompt assembly: macro coloring by connectivity, episode blocks, output format."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .cluster import kmeans, silhouette
from .metrics import overlap_area
from .netlist import Netlist, Placement
from .regions import Region, format_region_line
from .render import GRAY, render_png

# 32 visually distinct colors; reused cyclically beyond 32 clusters
PALETTE = [
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6",
    "#bcf60c", "#fabebe", "#008080", "#e6beff", "#9a6324", "#fffac8", "#800000", "#aaffc3",
    "#808000", "#ffd8b1", "#000075", "#ff7f50", "#8f45da", "#ef90df", "#a0ef90", "#efef90",
    "#b545da", "#9b69e6", "#90bfef", "#2f4f4f", "#d2691e", "#6b8e23", "#db7093", "#4682b4",
]


class PromptStrategy(str, enum.Enum):
    GREEDY = "greedy"
    DEFAULT = "default"
    EXPLORATORY = "exploratory"


class Modality(str, enum.Enum):
    FULL = "full"
    NO_IMG = "noimg"
    NO_TXT = "notxt"


def _enum(cls, v):
    if isinstance(v, cls):
        return v
    key = str(v).strip().lower().replace("_", "").replace("-", "")
    for m in cls:
        if m.value == key:
            return m
    raise ValueError(f"unknown {cls.__name__} {v!r}")


# ---------------------------------------------------------------------------
# coloring


def build_macro_graph(n: Netlist, macros: Sequence[int] | None = None) -> nx.Graph:
    """Macros as nodes; an edge per macro pair sharing nets, weighted by the shared-net count."""
    ids = n.macro_indices() if macros is None else [int(i) for i in macros]
    keep = set(ids)
    g = nx.Graph()
    g.add_nodes_from(ids)
    for net in n.nets:
        members = sorted({p.node for p in net.pins if p.node in keep})
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                u, v = members[a], members[b]
                if g.has_edge(u, v):
                    g[u][v]["weight"] += 1
                else:
                    g.add_edge(u, v, weight=1)
    return g


def embed_graph(g: nx.Graph, dim: int = 8, seed: int = 0, iterations: int = 200) -> dict[int, np.ndarray]:
    """Force-directed (Fruchterman-Reingold) coordinates in ``dim`` dimensions."""
    if g.number_of_nodes() == 0:
        return {}
    pos = nx.spring_layout(g, dim=dim, iterations=iterations, seed=seed, weight="weight", scale=None)
    return {int(k): np.asarray(v, dtype=float) for k, v in pos.items()}


@dataclass
class ColorAssignment:
    colors: dict[int, str] = field(default_factory=dict)
    clusters: dict[int, int] = field(default_factory=dict)  # -1 for isolated macros
    k: int = 1
    default: str = GRAY

    def color_of(self, i: int) -> str:
        return self.colors.get(int(i), self.default)


def choose_k(x: np.ndarray, k_range=(2, 30), seed: int = 0) -> tuple[int, np.ndarray]:
    """k with the highest mean silhouette (first on ties); k=2 if none is defined."""
    lo, hi = k_range
    hi = min(hi, len(x) - 1)
    best = (-np.inf, None, None)
    for k in range(max(2, lo), hi + 1):
        labels, _ = kmeans(x, k, seed=seed)
        s = silhouette(x, labels)
        if np.isfinite(s) and s > best[0]:
            best = (s, k, labels)
    if best[1] is None:
        k = min(2, len(x))
        return k, kmeans(x, k, seed=seed)[0]
    return best[1], best[2]


def color_macros(points: dict[int, np.ndarray], k_range=(2, 30), seed: int = 0,
                 isolated: Sequence[int] = ()) -> ColorAssignment:
    """Cluster embedded macros and give each cluster one palette color."""
    ids = sorted(points)
    out = ColorAssignment()
    for i in isolated:
        out.colors[int(i)] = GRAY
        out.clusters[int(i)] = -1
    if not ids:
        out.k = 0
        return out
    if len(ids) < 3:
        labels = np.zeros(len(ids), dtype=int)
        out.k = 1
    else:
        x = np.stack([points[i] for i in ids])
        out.k, labels = choose_k(x, k_range, seed)
    # renumber clusters by first appearance so colors do not depend on k-means label order
    remap: dict[int, int] = {}
    for i, lab in zip(ids, labels.tolist()):
        c = remap.setdefault(lab, len(remap))
        out.clusters[i] = c
        out.colors[i] = PALETTE[c % len(PALETTE)]
    return out


def assign_colors(n: Netlist, macros: Sequence[int], seed: int = 0, dim: int = 8) -> ColorAssignment:
    """Graph build, embedding and clustering in one call; macros without shared nets are gray."""
    g = build_macro_graph(n, macros)
    isolated = sorted(v for v in g.nodes if g.degree(v) == 0)
    g.remove_nodes_from(isolated)
    return color_macros(embed_graph(g, dim=dim, seed=seed), seed=seed, isolated=isolated)


# ---------------------------------------------------------------------------
# prompt


@dataclass
class Block:
    kind: str  # "text" or "image"
    content: object  # str for text, PNG bytes for images
    section: str
    episode: int | None = None


@dataclass
class PromptBundle:
    blocks: list[Block]
    strategy: PromptStrategy
    modality: Modality
    example_regions: dict[int, Region] = field(default_factory=dict)

    @property
    def text(self) -> str:
        return "\n\n".join(b.content for b in self.blocks if b.kind == "text")

    @property
    def images(self) -> list[bytes]:
        return [b.content for b in self.blocks if b.kind == "image"]

    def section(self, name: str) -> str:
        return "\n\n".join(b.content for b in self.blocks if b.kind == "text" and b.section == name)

    @property
    def episode_count(self) -> int:
        return len({b.episode for b in self.blocks if b.episode is not None})

    def save(self, directory: str, stem: str = "prompt") -> list[str]:
        import os

        os.makedirs(directory, exist_ok=True)
        paths = [os.path.join(directory, f"{stem}.txt")]
        with open(paths[0], "w", encoding="utf-8") as fh:
            fh.write(self.text + "\n")
        for k, img in enumerate(self.images, 1):
            paths.append(os.path.join(directory, f"{stem}_episode{k}.png"))
            with open(paths[-1], "wb") as fh:
                fh.write(img)
        return paths


STRATEGY_TEXT = {
    PromptStrategy.GREEDY: ("Prefer small, careful edits: keep each macro near where it sat in the "
                            "lowest-wirelength episodes and only nudge positions that look improvable."),
    PromptStrategy.DEFAULT: "",
    PromptStrategy.EXPLORATORY: ("Look for arrangements unlike the ones shown: try new groupings and "
                                 "positions, even ones that depart strongly from earlier episodes."),
}


def grid_cells(n: Netlist, p: Placement, i: int) -> Region:
    """Grid box occupied by macro ``i`` (rounded bottom-left, rounded-up footprint), kept in-grid."""
    cols, rows = n.grid
    fw, fh = n.footprint(i)
    x = int(round((p.x[i] - n.canvas_x) / n.pitch_x))
    y = int(round((p.y[i] - n.canvas_y) / n.pitch_y))
    x = min(max(x, 0), max(cols - fw, 0))
    y = min(max(y, 0), max(rows - fh, 0))
    return Region(x, y, min(cols, x + fw), min(rows, y + fh))


def _size_cells(n: Netlist, i: int) -> tuple[float, float]:
    return (n.widths[i] / n.pitch_x, n.heights[i] / n.pitch_y)


def _shelf_layout(n: Netlist, macros: Sequence[int]) -> dict[int, Region]:
    cols, rows = n.grid
    out, x, y, shelf = {}, 0, 0, 0
    for i in macros:
        fw, fh = n.footprint(i)
        if x + fw > cols:
            x, y, shelf = 0, y + shelf, 0
        if y + fh > rows:
            y = 0
        out[i] = Region(x, y, min(cols, x + fw), min(rows, y + fh))
        x += fw
        shelf = max(shelf, fh)
    return out


def format_example(n: Netlist, macros: Sequence[int], layout: Placement | None) -> tuple[list[str], dict[int, Region]]:
    """Sample answer lines for the guidance macros, alternating the two accepted separators."""
    regions = ({i: grid_cells(n, layout, i) for i in macros} if layout is not None
               else _shelf_layout(n, macros))
    lines = [format_region_line(n.nodes[i].name, _size_cells(n, i), regions[i], "to" if k % 2 else "and")
             for k, i in enumerate(macros)]
    return lines, regions


def build_prompt(context: Sequence, n: Netlist, colors: ColorAssignment, guidance_macros: Sequence[int],
                 strategy="default", modality="full", grid: tuple[int, int] | None = None,
                 image_px: int = 512) -> PromptBundle:
    """Assemble the prompt for one query from the selected context entries (in the given order)."""
    strategy = _enum(PromptStrategy, strategy)
    modality = _enum(Modality, modality)
    if grid is not None and tuple(grid) != n.grid:
        n = n.with_grid(*grid)
    cols, rows = n.grid
    macros = [int(i) for i in guidance_macros]
    missing = [n.nodes[i].name for i in macros if i not in colors.colors]
    if missing:
        raise ValueError(f"no color assigned to guidance macros {missing[:5]}")
    blocks: list[Block] = []

    def text(section, s, episode=None):
        blocks.append(Block("text", s, section, episode))

    pre = ("You are helping place macros on a chip canvas. Placement quality is measured by total wirelength "
           "(smaller is better), and macros must never overlap. Below are the macros to place, the canvas "
           "rules and earlier placement episodes with their results. Study which arrangements led to low "
           "wirelength and propose a region for every listed macro.")
    if STRATEGY_TEXT[strategy]:
        pre += "\n\n" + STRATEGY_TEXT[strategy]
    text("preamble", pre)

    table = ["MACROS (name | color | width x height in grid cells):"]
    for i in macros:
        w, h = _size_cells(n, i)
        table.append(f"{n.nodes[i].name} | {colors.color_of(i)} | {w:g} x {h:g}")
    text("macros", "\n".join(table))

    corner = f"{cols},{rows}"
    rules = [
        "CANVAS RULES:",
        f"1. The canvas is a {cols} x {rows} grid.",
        f"2. (0,0) is the bottom-left corner; (0,{rows}) top-left, ({cols},0) bottom-right, ({corner}) top-right.",
        "3. Describe each region by its bottom-left and top-right corners.",
        "4. Regions for different macros should not overlap.",
        f"5. Give one region for each of these macros: {', '.join(n.nodes[i].name for i in macros)}.",
        "Lower wirelength is better; any macro overlap makes a placement invalid.",
    ]
    text("rules", "\n".join(rules))

    intro = ["PREVIOUS EPISODES:",
             "Each episode lists where the macros above were placed and its final metrics.",
             "Its canvas image shows standard cells as blue dots and macros as colored boxes; "
             "the macros you must place are outlined in red and labelled."]
    text("episodes", "\n".join(intro))
    for k, e in enumerate(context, 1):
        p = e.placement
        text("episodes", f"Episode #{k}", k)
        if modality is not Modality.NO_TXT:
            lines = ["Macro positions:"]
            for i in macros:
                r = grid_cells(n, p, i)
                lines.append(f"- {n.nodes[i].name}: ({r.x1},{r.y1}) to ({r.x2},{r.y2})")
            text("episodes", "\n".join(lines), k)
        if modality is not Modality.NO_IMG:
            blocks.append(Block("image", render_png(p, n, colors, macros, image_px), "episodes", k))
        text("episodes", f"Results for Episode #{k}: Wirelength: {e.hpwl:.2e}; "
                         f"Macro Overlap: {int(round(overlap_area(n, p)))}", k)

    bound = f"between 0 and {cols}" if cols == rows else f"between 0 and {cols} for x and 0 and {rows} for y"
    fmt = [
        "OUTPUT FORMAT:",
        f"1. Every coordinate is an integer {bound}.",
        "2. Every region has positive width and height (x2 > x1 and y2 > y1).",
        "3. Macros keep their orientation; do not rotate them.",
        "4. A region must fit its macro inside the canvas; fractional sizes round up, so a 2.3 x 3.6 macro "
        "needs a region of at least 3 x 4.",
    ]
    text("format", "\n".join(fmt))
    scaffold = ("Start with a short analysis of the episodes: which placements of each color group gave the "
                "lowest wirelength, how the large macros differ between good and bad episodes, and which groups "
                "benefit from sitting next to each other. Then list one line per macro in the form\n"
                "MACRO_NAME (W x H): (x1,y1) and (x2,y2)\n"
                "where the separator may be 'and' or 'to'. For example:")
    layout = context[0].placement if context else None
    lines, regions = format_example(n, macros, layout)
    text("format", scaffold + "\n" + "\n".join(lines))
    text("state", f"Now give your analysis followed by regions for all {len(macros)} macros.")
    return PromptBundle(blocks, strategy, modality, regions)
