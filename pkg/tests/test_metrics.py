import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_toy
from macroevo.metrics import (UnplacedNodeError, evaluate, net_hpwl, overlap_area, per_net_hpwl, rudy_map,
                              total_hpwl)
from macroevo.netlist import Net, Netlist, Node, NodeKind, Pin, Placement
from oracles import hpwl_bruteforce, netlist_tables


def _two_node(dx=0.0):
    nodes = [Node("a", 1, 1, NodeKind.MACRO, True), Node("b", 1, 1, NodeKind.MACRO, True)]
    nets = [Net("n", (Pin(0, 0, 0), Pin(1, dx, 0)))]
    return Netlist("t", nodes, nets, (0, 0, 10, 10), (10, 10))


def test_two_pin_hpwl():
    n = _two_node()
    p = Placement(np.array([0.0, 3.0]), np.array([0.0, 4.0]), n.grid)
    assert total_hpwl(n, p) == 7.0
    assert net_hpwl(n.nets[0], n, p) == 7.0


def test_pin_offsets_move_pins():
    n = _two_node(dx=2.0)
    p = Placement(np.array([0.0, 0.0]), np.array([0.0, 0.0]), n.grid)
    assert total_hpwl(n, p) == 2.0


def test_unplaced_pin_raises():
    n = _two_node()
    p = Placement(np.array([0.0, np.nan]), np.array([0.0, np.nan]), n.grid)
    with pytest.raises(UnplacedNodeError, match="'b'"):
        total_hpwl(n, p)


def test_toy_initial_hpwl(toy4, toy16):
    assert total_hpwl(toy4, toy4.initial_placement()) == 28.5
    assert total_hpwl(toy16, toy16.initial_placement()) == 53.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hpwl_matches_bruteforce(seed):
    n, p = random_toy(np.random.default_rng(seed))
    nodes, nets = netlist_tables(n)
    assert total_hpwl(n, p) == pytest.approx(hpwl_bruteforce(nodes, nets, list(zip(p.x, p.y))), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
def test_hpwl_invariant_under_net_order(seed, rnd):
    n, p = random_toy(np.random.default_rng(seed))
    nets = list(n.nets)
    rnd.shuffle(nets)
    m = Netlist(n.name, n.nodes, nets, (0, 0, n.canvas_width, n.canvas_height), n.grid)
    assert total_hpwl(m, p) == total_hpwl(n, p)


def test_macros_only_ignores_cells():
    nodes = [Node("m", 2, 2, NodeKind.MACRO, True), Node("c", 1, 1, NodeKind.STANDARD_CELL, True)]
    n = Netlist("t", nodes, [Net("n", (Pin(0, 0, 0), Pin(1, 0, 0)))], (0, 0, 10, 10), (10, 10))
    p = Placement(np.array([0.0, np.nan]), np.array([0.0, np.nan]), n.grid)
    assert per_net_hpwl(n, p, macros_only=True).tolist() == [0.0]


def test_overlap_examples():
    n = _two_node()
    assert overlap_area(n, Placement(np.array([0.0, 0.5]), np.array([0.0, 0.5]), n.grid)) == 0.25
    assert overlap_area(n, Placement(np.array([0.0, 1.0]), np.array([0.0, 0.0]), n.grid)) == 0.0
    assert overlap_area(n, Placement(np.array([0.0, 0.0]), np.array([0.0, 0.0]), n.grid)) == 1.0


def _rudy_oracle_mass(n, p):
    """Summed clamped half perimeters over nets with at least two pins."""
    px, py = n.canvas_width / n.grid[0], n.canvas_height / n.grid[1]
    total = []
    for net in n.nets:
        if len(net.pins) < 2:
            continue
        xs = [p.x[q.node] + n.widths[q.node] / 2 + q.dx for q in net.pins]
        ys = [p.y[q.node] + n.heights[q.node] / 2 + q.dy for q in net.pins]
        total.append(max(max(xs) - min(xs), px) + max(max(ys) - min(ys), py))
    return math.fsum(total)


def test_rudy_single_net_density():
    n = _two_node()
    p = Placement(np.array([0.0, 4.0]), np.array([0.0, 4.0]), n.grid)  # box 4 x 4 from (0.5,0.5)
    m = rudy_map(n, p)
    assert m.shape == (10, 10)
    # fully covered bin: density (w + h) / (w * h) = 0.5
    assert m[2, 2] == pytest.approx(0.5)
    assert m[0, 0] == pytest.approx(0.5 * 0.25)
    assert m[6, 6] == 0


def test_rudy_mass_conservation(toy16):
    p = toy16.initial_placement()
    # toy16 pads sit outside the core, so only check that mass is positive and finite
    m = rudy_map(toy16, p)
    assert np.isfinite(m).all() and m.sum() > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rudy_mass_property(seed):
    n, p = random_toy(np.random.default_rng(seed))
    m = rudy_map(n, p)
    bin_area = (n.canvas_width / n.grid[0]) * (n.canvas_height / n.grid[1])
    expect = _rudy_oracle_mass(n, p)
    assert m.sum() * bin_area == pytest.approx(expect, rel=1e-9, abs=1e-12)


def test_evaluate_report(toy4):
    r = evaluate(toy4, toy4.initial_placement())
    rec = r.to_record()
    assert rec["total_hpwl"] == 28.5 and rec["overlap_area"] == 0.0
    assert r.to_csv().splitlines()[0] == "total_hpwl,overlap_area,rudy_max"
    assert '"total_hpwl": 28.5' in r.to_json()
