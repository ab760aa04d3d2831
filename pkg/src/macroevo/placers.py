"""Low-level placers behind one interface, each consuming an optional SuggestionSet."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .analytical import AnchorSet, PlacerConfig, solve
from .netlist import Netlist, Placement
from .policy import BaselinePolicy, PolicyInterface, feasible_cells, rollout
from .regions import SuggestionSet, anchor_for, validate_for


@dataclass
class PlaceOutcome:
    placement: Placement  # unlegalized
    suggested: int = 0  # suggestions offered for this rollout
    invalid: int = 0  # suggestions that could not be honoured


def usable_region(n: Netlist, macro: int, region, obstacles: Placement) -> bool:
    """A suggestion is usable if it fits the macro and some cell in it clears the obstacles."""
    if validate_for(region, n, macro) is not None:
        return False
    return bool(feasible_cells(region, n, macro, obstacles).any())


class AnalyticalPlacer:
    """Gradient placement; each usable suggestion becomes a bottom-left anchor."""

    name = "analytical"

    def __init__(self, cfg: PlacerConfig | None = None):
        self.cfg = cfg or PlacerConfig()

    def anchors(self, n: Netlist, suggestions: SuggestionSet | None) -> tuple[AnchorSet, int]:
        if not suggestions:
            return AnchorSet(), 0
        fixed = Placement.empty(len(n.nodes), n.grid)
        keep = ~n.movable
        fixed.x[keep] = n.init_x[keep]
        fixed.y[keep] = n.init_y[keep]
        targets, invalid = {}, 0
        for m, region in sorted(suggestions.regions.items()):
            if n.movable[m] and usable_region(n, m, region, fixed):
                targets[m] = anchor_for(region, n)
            else:
                invalid += 1
        return AnchorSet(targets), invalid

    def place(self, n: Netlist, suggestions: SuggestionSet | None, seed: int) -> PlaceOutcome:
        anchors, invalid = self.anchors(n, suggestions)
        res = solve(n, self.cfg.with_seed(seed), anchors)
        return PlaceOutcome(res.placement, len(suggestions) if suggestions else 0, invalid)


class PolicyPlacer:
    """Sequential masked-policy macro placement; standard cells then placed analytically."""

    name = "policy"

    def __init__(self, policy: PolicyInterface | None = None, cell_cfg: PlacerConfig | None = None):
        self.policy = policy or BaselinePolicy()
        self.cell_cfg = cell_cfg or PlacerConfig(lambda_anchor=0.0)

    def place(self, n: Netlist, suggestions: SuggestionSet | None, seed: int) -> PlaceOutcome:
        res = rollout(self.policy, n, suggestions, seed)
        p = res.placement
        cells = ~n.is_macro & n.movable
        if cells.any():
            macros = np.flatnonzero(n.is_macro)
            sol = solve(n, replace(self.cell_cfg, seed=int(seed)), None, init=p, fixed=macros)
            p = sol.placement
        return PlaceOutcome(p, len(suggestions) if suggestions else 0, res.fallback_count)
