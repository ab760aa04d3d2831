import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from macroevo.netlist import (BookshelfError, NodeKind, Placement, bundled_benchmark, parse_bookshelf,
                              parse_placement, read_placement, select_guidance_macros, serialize_placement,
                              write_bookshelf)


def test_toy4_counts(toy4):
    assert toy4.summary() == "toy4: 4 nodes, 3 nets, 7 pins, 4 macros"
    assert (toy4.canvas_x, toy4.canvas_y, toy4.canvas_width, toy4.canvas_height) == (0, 0, 8, 10)
    assert toy4.row_height == 1
    assert [toy4.nodes[i].name for i in toy4.macro_indices()] == ["A", "B", "C", "D"]


def test_toy16_classification(toy16):
    kinds = [v.kind for v in toy16.nodes]
    assert kinds.count(NodeKind.MACRO) == 4
    assert kinds.count(NodeKind.TERMINAL) == 12
    assert not toy16.movable[toy16.is_terminal].any()
    assert toy16.num_pins == 26 and len(toy16.nets) == 10


def test_pin_offsets_parsed(toy4):
    net = toy4.nets[2]
    assert [(toy4.nodes[p.node].name, p.dx, p.dy) for p in net.pins] == [("C", 0.5, 0.5), ("D", -1.0, 0.0)]


@pytest.mark.parametrize("bench,grid", [("toy4", (8, 10)), ("toy16", (8, 8))])
def test_bookshelf_round_trip(tmp_path, bench, grid):
    n = parse_bookshelf(bundled_benchmark(bench), grid=grid)
    aux = write_bookshelf(n, n.initial_placement(), str(tmp_path))
    m = parse_bookshelf(aux, grid=grid)
    assert m.nodes == n.nodes
    assert m.nets == n.nets
    assert (m.canvas_x, m.canvas_y, m.canvas_width, m.canvas_height) == (
        n.canvas_x, n.canvas_y, n.canvas_width, n.canvas_height)
    assert m.initial_placement() == n.initial_placement()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=16, max_size=16))
def test_placement_text_round_trip(coords):
    n = parse_bookshelf(bundled_benchmark("toy16"), grid=(8, 8))
    p = Placement(np.array([c[0] for c in coords]), np.array([c[1] for c in coords]), n.grid)
    assert parse_placement(serialize_placement(p, n), n) == p


def test_serialize_marks_fixed(toy16):
    text = serialize_placement(toy16.initial_placement(), toy16)
    assert "P0\t-1\t1\t: N /FIXED" in text
    assert "MA\t0\t0\t: N\n" in text


def test_serialize_requires_positions(toy4):
    with pytest.raises(ValueError, match="no position"):
        serialize_placement(Placement.empty(4), toy4)


def _copy_bench(tmp_path, name="toy4"):
    src = os.path.dirname(bundled_benchmark(name))
    for f in os.listdir(src):
        with open(os.path.join(src, f)) as a, open(tmp_path / f, "w") as b:
            b.write(a.read())
    return tmp_path / f"{name}.aux"


def _edit(path, old, new):
    text = path.read_text()
    assert old in text
    path.write_text(text.replace(old, new, 1))


def test_missing_file_reports_path(tmp_path):
    aux = _copy_bench(tmp_path)
    os.remove(tmp_path / "toy4.nets")
    with pytest.raises(BookshelfError, match="toy4.nets: missing file"):
        parse_bookshelf(str(aux))


def test_unknown_node_reports_line(tmp_path):
    aux = _copy_bench(tmp_path)
    _edit(tmp_path / "toy4.nets", "\tB\tI : 0.0 0.0", "\tZZ\tI : 0.0 0.0")
    with pytest.raises(BookshelfError, match=r"toy4\.nets:\d+: pin references unknown node 'ZZ'"):
        parse_bookshelf(str(aux))


def test_duplicate_node(tmp_path):
    aux = _copy_bench(tmp_path)
    _edit(tmp_path / "toy4.nodes", "B\t2\t2", "A\t2\t2")
    with pytest.raises(BookshelfError, match="duplicate node name 'A'"):
        parse_bookshelf(str(aux))


def test_malformed_number(tmp_path):
    aux = _copy_bench(tmp_path)
    _edit(tmp_path / "toy4.pl", "B\t4\t4", "B\tfour\t4")
    with pytest.raises(BookshelfError, match="malformed numeric field 'four'"):
        parse_bookshelf(str(aux))


def test_declared_count_mismatch(tmp_path):
    aux = _copy_bench(tmp_path)
    _edit(tmp_path / "toy4.nodes", "NumNodes : 4", "NumNodes : 5")
    with pytest.raises(BookshelfError, match="NumNodes declares 5"):
        parse_bookshelf(str(aux))


def test_read_placement_missing(toy4, tmp_path):
    with pytest.raises(BookshelfError, match="missing file"):
        read_placement(str(tmp_path / "nope.pl"), toy4)


def test_guidance_order_by_area_then_pins(toy16):
    names = [toy16.nodes[i].name for i in select_guidance_macros(toy16)]
    # MA and MB have area 6; MA has more pins
    assert names[:2] == ["MA", "MB"]
    assert set(names) == {"MA", "MB", "MC", "MD"}
    assert len(select_guidance_macros(toy16, limit=2)) == 2


def test_unfix_and_all_macros(tmp_path):
    aux = _copy_bench(tmp_path)
    _edit(tmp_path / "toy4.pl", "A\t0\t0\t: N", "A\t0\t0\t: N /FIXED")
    n = parse_bookshelf(str(aux))
    assert not n.movable[n.index["A"]]
    assert parse_bookshelf(str(aux), unfix_macros=True).movable[n.index["A"]]


def test_footprint_rounds_up(toy4):
    m = toy4.with_grid(16, 20)  # pitch 0.5
    assert m.footprint(m.index["D"]) == (6, 4)
    assert toy4.footprint(toy4.index["D"]) == (3, 2)


ADAPTEC1 = os.environ.get("MACROEVO_ADAPTEC1")


@pytest.mark.skipif(not ADAPTEC1, reason="set MACROEVO_ADAPTEC1 to an adaptec1.aux to run")
def test_adaptec1_counts():
    n = parse_bookshelf(ADAPTEC1)
    assert int(n.is_macro.sum()) == 63
    assert round(len(n.nets) / 1000) == 221
