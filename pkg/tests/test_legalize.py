import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_toy
from macroevo.legalize import LegalizationError, legalize
from macroevo.metrics import overlap_area
from macroevo.netlist import Netlist, Node, NodeKind, Placement


def two(sizes=((2, 2), (2, 2)), canvas=(6, 6)):
    nodes = [Node(f"m{i}", w, h, NodeKind.MACRO, True) for i, (w, h) in enumerate(sizes)]
    return Netlist("l", nodes, [], (0, 0) + canvas, canvas)


def in_canvas(n, p):
    m = n.is_macro
    return bool(np.all(p.x[m] >= n.canvas_x - 1e-9) and np.all(p.y[m] >= n.canvas_y - 1e-9)
                and np.all(p.x[m] + n.widths[m] <= n.canvas_x + n.canvas_width + 1e-9)
                and np.all(p.y[m] + n.heights[m] <= n.canvas_y + n.canvas_height + 1e-9))


def test_legal_input_unchanged():
    n = two()
    p = Placement(np.array([0.0, 3.0]), np.array([0.0, 3.0]), n.grid)
    assert legalize(p, n) == p


def test_stacked_macros_separated():
    n = two()
    p = Placement(np.array([1.0, 1.0]), np.array([1.0, 1.0]), n.grid)
    out = legalize(p, n)
    assert overlap_area(n, out) == 0 and in_canvas(n, out)
    assert legalize(p, n) == out


def test_outside_canvas_pulled_in():
    n = two()
    p = Placement(np.array([-3.0, 5.5]), np.array([0.0, 5.0]), n.grid)
    out = legalize(p, n)
    assert in_canvas(n, out) and overlap_area(n, out) == 0


def test_too_much_area():
    n = two(((3, 3), (3, 3)), canvas=(4, 4))
    with pytest.raises(LegalizationError, match="exceeds"):
        legalize(Placement(np.zeros(2), np.zeros(2), n.grid), n)


def test_unplaced_rejected():
    n = two()
    with pytest.raises(LegalizationError):
        legalize(Placement.empty(2, n.grid), n)


def test_fixed_macros_never_move():
    nodes = [Node("f", 3, 3, NodeKind.MACRO, False), Node("m", 2, 2, NodeKind.MACRO, True)]
    n = Netlist("l", nodes, [], (0, 0, 6, 6), (6, 6), init_x=[1, 0], init_y=[1, 0])
    p = Placement(np.array([1.0, 1.0]), np.array([1.0, 1.0]), n.grid)
    out = legalize(p, n)
    assert out.position(0) == (1.0, 1.0) and overlap_area(n, out) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_instances(seed):
    rng = np.random.default_rng(seed)
    n, p = random_toy(rng, grid=(12, 12), cells=3)
    p.x += rng.uniform(-1, 1, len(p))
    p.y += rng.uniform(-1, 1, len(p))
    out = legalize(p, n)
    assert overlap_area(n, out) == 0 and in_canvas(n, out)
    assert legalize(out, n) == out
    disp = np.hypot(out.x - p.x, out.y - p.y)[n.is_macro].mean()
    assert disp <= np.hypot(n.canvas_width, n.canvas_height)
    cells = ~n.is_macro
    assert np.all(out.x[cells] >= 0) and np.all(out.x[cells] + 1 <= n.canvas_width)
