"""Evolutionary macro placement with region suggestions."""

from .netlist import (
    BookshelfError,
    Net,
    Netlist,
    Node,
    NodeKind,
    Pin,
    Placement,
    bundled_benchmark,
    parse_bookshelf,
    parse_placement,
    select_guidance_macros,
    serialize_placement,
)
from .metrics import MetricReport, evaluate, net_hpwl, overlap_area, rudy_map, total_hpwl

from .analytical import AnchorSet, PlacerConfig, solve
from .evolution import EvolutionConfig, Strategy, run, select_context, summarize
from .legalize import legalize
from .placers import AnalyticalPlacer, PolicyPlacer
from .policy import BaselinePolicy, PolicyInterface, rollout
from .prompt import assign_colors, build_prompt
from .providers import MockOracle, ProviderConfig, RemoteProvider, RemoteVLMClient
from .regions import Region, SuggestionSet, parse_response
from .render import render_canvas, render_png

__version__ = "0.1.0"
