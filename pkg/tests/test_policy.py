import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_toy
from macroevo.netlist import Net, Netlist, Node, NodeKind, Pin, Placement
from macroevo.policy import (BaselinePolicy, PlacementError, PolicyInterface, feasible_cells, hpwl_delta,
                             mask_distribution, order_macros_policy, rollout)
from macroevo.regions import Region, SuggestionSet


def grid_netlist(sizes, grid=(8, 8), nets=(), names=None):
    names = names or [f"m{i}" for i in range(len(sizes))]
    nodes = [Node(nm, w, h, NodeKind.MACRO, True) for nm, (w, h) in zip(names, sizes)]
    return Netlist("g", nodes, list(nets), (0, 0) + tuple(grid), grid)


def cells(mask):
    return {(int(a), int(b)) for a, b in zip(*np.nonzero(mask))}


def test_order_pin_count_first():
    nets = [Net(f"n{k}", (Pin(0), Pin(2))) for k in range(5)] + [Net(f"e{k}", (Pin(1), Pin(2))) for k in range(2)]
    n = grid_netlist([(1, 1), (10, 10), (1, 1)], grid=(20, 20), nets=nets)
    order = order_macros_policy(n)
    assert order[0] == 2  # hub with 7 pins
    assert order.index(0) < order.index(1)  # 5 pins beats 2 pins despite area


def test_order_ties_and_singleton():
    n = grid_netlist([(1, 1)] * 3, names=["c", "a", "b"])
    assert order_macros_policy(n) == [1, 2, 0]
    assert order_macros_policy(grid_netlist([(1, 1)])) == [0]


def test_feasible_examples():
    n = grid_netlist([(2, 2), (3, 3)])
    empty = Placement.empty(2, n.grid)
    assert cells(feasible_cells(Region(0, 0, 3, 3), n, 0, empty)) == {(0, 0), (0, 1), (1, 0), (1, 1)}
    full = feasible_cells(Region(0, 0, 8, 8), n, 0, empty)
    assert cells(full) == {(a, b) for a in range(7) for b in range(7)}
    assert np.array_equal(full, feasible_cells(None, n, 0, empty))
    blocked = empty.copy()
    blocked.set(1, 0.0, 0.0)
    assert not feasible_cells(Region(0, 0, 3, 3), n, 0, blocked).any()


def test_footprint_rounds_up():
    n = grid_netlist([(1.2, 1.0)])
    f = feasible_cells(Region(0, 0, 2, 1), n, 0, Placement.empty(1, n.grid))
    assert cells(f) == {(0, 0)}
    assert not feasible_cells(Region(0, 0, 1, 1), n, 0, Placement.empty(1, n.grid)).any()


def test_mask_distribution_examples():
    base = np.full((2, 2), 0.25)
    assert np.array_equal(mask_distribution(base, np.ones((2, 2), bool)), base)
    uni = np.full((4, 4), 1 / 16)
    m = np.zeros((4, 4), bool)
    m[:2, :2] = True
    assert np.allclose(mask_distribution(uni, m)[m], 0.25)
    d = np.array([[0.1, 0.3, 0.6]])
    out = mask_distribution(d, np.array([[True, True, False]]))
    assert out[0].tolist() == pytest.approx([0.25, 0.75, 0.0])
    with pytest.raises(ValueError):
        mask_distribution(d, np.zeros((1, 3), bool))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mask_preserves_ratios(seed):
    rng = np.random.default_rng(seed)
    d = rng.random((5, 4))
    d /= d.sum()
    m = rng.random((5, 4)) < 0.5
    m[0, 0] = True
    out = mask_distribution(d, m)
    assert out.sum() == pytest.approx(1.0) and not out[~m].any()
    assert np.allclose(out[m] / out[0, 0], d[m] / d[0, 0])


def two_cell():
    nodes = [Node("M", 10, 10, NodeKind.MACRO, True), Node("p", 1, 1, NodeKind.TERMINAL, False)]
    return Netlist("two", nodes, [Net("n", (Pin(0), Pin(1)))], (0, 0, 20, 10), (2, 1),
                   init_x=[0, 4.5], init_y=[0, 4.5])


def test_baseline_two_cell_softmax():
    n = two_cell()
    placed = n.initial_placement()
    placed.x[0] = placed.y[0] = np.nan
    free = feasible_cells(None, n, 0, placed)
    assert hpwl_delta(n, 0, placed)[:, 0].tolist() == [0.0, 10.0]
    d = BaselinePolicy(0.1).distribution(n, 0, placed, free)
    e = math.exp(-1)
    assert d[:, 0].tolist() == pytest.approx([1 / (1 + e), e / (1 + e)], rel=1e-12)
    assert np.allclose(BaselinePolicy(0.0).distribution(n, 0, placed, free), 0.5)


def test_baseline_single_feasible_cell():
    n = grid_netlist([(2, 2), (1, 1)], grid=(3, 2))
    placed = Placement.empty(2, n.grid)
    placed.set(1, 2.0, 0.0)
    free = feasible_cells(None, n, 0, placed)
    d = BaselinePolicy(1.0).distribution(n, 0, placed, free)
    assert d[0, 0] == 1.0 and d.sum() == 1.0


def test_hpwl_delta_matches_direct(toy16):
    placed = toy16.initial_placement()
    m = toy16.macro_indices(movable_only=True)
    for i in m:
        placed.x[i] = placed.y[i] = np.nan
    target = m[0]
    delta = hpwl_delta(toy16, target, placed)
    nets = toy16.node_nets(target)
    for cx, cy in [(0, 0), (3, 2), (6, 6)]:
        q = placed.copy()
        q.set(target, cx * toy16.pitch_x, cy * toy16.pitch_y)
        # nets touching only placed nodes; unplaced nodes dropped from each net
        total = 0.0
        for e in nets:
            pins = [p for p in toy16.nets[e].pins if q.placed[p.node]]
            xs = [q.x[p.node] + toy16.widths[p.node] / 2 + p.dx for p in pins]
            ys = [q.y[p.node] + toy16.heights[p.node] / 2 + p.dy for p in pins]
            others = [p for p in pins if p.node != target]
            ox = [q.x[p.node] + toy16.widths[p.node] / 2 + p.dx for p in others]
            oy = [q.y[p.node] + toy16.heights[p.node] / 2 + p.dy for p in others]
            before = (max(ox) - min(ox) + max(oy) - min(oy)) if others else 0.0
            total += max(xs) - min(xs) + max(ys) - min(ys) - before
        assert delta[cx, cy] == pytest.approx(total)


def test_rollout_no_suggestions(toy16):
    r = rollout(BaselinePolicy(0.2), toy16, None, seed=1)
    assert r.fallback_count == 0
    assert all(not s.fallback and s.region is None for s in r.steps)
    assert np.all(r.placement.placed[toy16.is_macro])
    assert [s.macro for s in r.steps] == order_macros_policy(toy16)


def test_rollout_pinned_by_oracle(toy16):
    from macroevo.netlist import read_placement, bundled_benchmark
    import os
    tgt = read_placement(os.path.join(os.path.dirname(bundled_benchmark("toy16")), "toy16.target.pl"), toy16)
    regs = {}
    for i in toy16.macro_indices(movable_only=True):
        fw, fh = toy16.footprint(i)
        cx, cy = int(tgt.x[i]), int(tgt.y[i])
        regs[i] = Region(cx, cy, cx + fw, cy + fh)
    r = rollout(BaselinePolicy(0.2), toy16, SuggestionSet(regs), seed=3)
    for i in regs:
        assert r.placement.position(i) == tgt.position(i)
    assert r.fallback_count == 0


def test_rollout_fallback_counted():
    nets = [Net("a", (Pin(0), Pin(1))), Net("b", (Pin(0), Pin(1))), Net("c", (Pin(0), Pin(2)))]
    n = grid_netlist([(2, 2), (2, 2), (1, 1)], grid=(6, 6), nets=nets)
    order = order_macros_policy(n)
    assert order[:2] == [0, 1]
    s = SuggestionSet({0: Region(0, 0, 2, 2), 1: Region(0, 0, 3, 3)})
    r = rollout(BaselinePolicy(0.1), n, s, seed=0)
    assert r.placement.position(0) == (0.0, 0.0)
    assert r.fallback_count == 1
    assert [st.fallback for st in r.steps] == [False, True, False]


def test_rollout_deterministic(toy16):
    a = rollout(BaselinePolicy(0.2), toy16, SuggestionSet({toy16.index["MA"]: Region(0, 0, 5, 5)}), seed=9)
    b = rollout(BaselinePolicy(0.2), toy16, SuggestionSet({toy16.index["MA"]: Region(0, 0, 5, 5)}), seed=9)
    assert a.placement == b.placement and a.steps == b.steps


def test_rollout_full_canvas_error():
    n = grid_netlist([(2, 2), (2, 2)], grid=(3, 3), names=["big", "late"])
    with pytest.raises(PlacementError, match="late|big"):
        rollout(BaselinePolicy(0.0), n, None, seed=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_masking_soundness_property(seed):
    rng = np.random.default_rng(seed)
    n, _ = random_toy(rng, max_macros=6, grid=(10, 10))
    regs = {}
    for i in n.macro_indices():
        x1, y1 = int(rng.integers(0, 9)), int(rng.integers(0, 9))
        regs[i] = Region(x1, y1, int(rng.integers(x1 + 1, 11)), int(rng.integers(y1 + 1, 11)))
    try:
        r = rollout(BaselinePolicy(0.3), n, SuggestionSet(regs), seed=seed)
    except PlacementError:
        return
    for s in r.steps:
        fw, fh = n.footprint(s.macro)
        assert s.fallback == (s.feasible_count == 0)
        if not s.fallback:
            assert s.region.contains_cell(*s.cell, fw, fh)


class UniformPolicy(PolicyInterface):
    def distribution(self, n, macro, placed, free, rng):
        return free / free.sum()


def test_custom_policy_via_interface(toy16):
    r = rollout(UniformPolicy(), toy16, None, seed=0)
    assert np.all(r.placement.placed[toy16.is_macro])
