import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from macroevo.netlist import Net, Netlist, Node, NodeKind, Pin, Placement, bundled_benchmark, parse_bookshelf

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def toy4():
    return parse_bookshelf(bundled_benchmark("toy4"), grid=(8, 10))


@pytest.fixture(scope="session")
def toy16():
    return parse_bookshelf(bundled_benchmark("toy16"), grid=(8, 8))


def random_toy(rng, max_macros=10, max_nets=20, grid=(10, 10), cells=0, half_offsets=False):
    """Random all-macro netlist on an integer canvas with integer-grid positions.

    ``half_offsets`` draws pin offsets from {-0.5, 0, 0.5} so every sum is exact.
    """
    cols, rows = grid
    k = int(rng.integers(2, max_macros + 1))
    nodes = [Node(f"m{i}", float(rng.integers(1, 4)), float(rng.integers(1, 4)), NodeKind.MACRO, True)
             for i in range(k)]
    nodes += [Node(f"c{i}", 1.0, 1.0, NodeKind.STANDARD_CELL, True) for i in range(cells)]
    nets = []
    for e in range(int(rng.integers(1, max_nets + 1))):
        deg = int(rng.integers(1, min(5, len(nodes)) + 1))
        members = rng.choice(len(nodes), size=deg, replace=False)
        if half_offsets:
            pins = [Pin(int(m), float(rng.integers(-1, 2)) / 2, float(rng.integers(-1, 2)) / 2) for m in members]
        else:
            pins = [Pin(int(m), float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5))) for m in members]
        nets.append(Net(f"n{e}", pins))
    n = Netlist("rand", nodes, nets, (0, 0, cols, rows), grid)
    p = Placement(rng.integers(0, cols - 2, len(nodes)).astype(float),
                  rng.integers(0, rows - 2, len(nodes)).astype(float), grid)
    return n, p


def record_acceptance(number: int, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
