"""Shared helpers and independent oracles for the test suite.

The oracles here deliberately avoid the package's own simulator and
reference functions: the hierarchy is evaluated recursively straight from
the parsed IR, and arithmetic expectations are plain Python integers.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from netlearn.augment import ARCHITECTURES, DesignSpec, find_top, synth_generate
from netlearn.graph import to_graph
from netlearn.netlist import PRIMITIVES, flatten, parse_netlist, simulate

ALL_ARCHS = [(c, a) for c, archs in ARCHITECTURES.items() for a in archs]


def gate_value(fn: str, vals: list[int]) -> int:
    if fn == "AND":
        return int(all(vals))
    if fn == "OR":
        return int(any(vals))
    if fn == "NAND":
        return 1 - int(all(vals))
    if fn == "NOR":
        return 1 - int(any(vals))
    if fn == "XOR":
        return sum(vals) % 2
    if fn == "XNOR":
        return 1 - sum(vals) % 2
    if fn == "NOT":
        return 1 - vals[0]
    if fn == "BUF":
        return vals[0]
    if fn == "MUX":
        a, b, sel = vals
        return b if sel else a
    raise AssertionError(f"oracle has no rule for {fn}")


def hier_eval(nl, module: str, inputs: dict[str, int]) -> dict[str, int]:
    """Evaluate ``module`` on scalar input bits by recursive descent, no flattening.

    Instances fire once all their inputs are known; the loop repeats until
    every instance has fired.
    """
    mod = nl.modules[module]
    decls = mod.decl_map()
    vals = dict(inputs)
    pending = list(mod.instances)
    while pending:
        progressed = False
        rest = []
        for inst in pending:
            if inst.target in PRIMITIVES:
                out, *ins = [nets[0] for _, nets in inst.bindings]
                if all(n in vals for n in ins):
                    vals[out] = gate_value(PRIMITIVES[inst.target], [vals[n] for n in ins])
                    progressed = True
                else:
                    rest.append(inst)
                continue
            child = nl.modules[inst.target]
            cdecl = child.decl_map()
            ports = [p for p in child.port_names if cdecl[p].kind in ("input", "output")]
            bound = dict(inst.bindings) if not inst.bindings or inst.bindings[0][0] else dict(
                zip(ports, (nets for _, nets in inst.bindings))
            )
            child_in, outs = {}, []
            ready = True
            for p in ports:
                d = cdecl[p]
                for bit, net in zip(d.bits(), bound.get(p, ())):
                    if d.kind == "input":
                        if net not in vals:
                            ready = False
                        else:
                            child_in[bit] = vals[net]
                    else:
                        outs.append((bit, net))
            if not ready:
                rest.append(inst)
                continue
            res = hier_eval(nl, inst.target, child_in)
            for bit, net in outs:
                vals[net] = res[bit]
            progressed = True
        assert progressed, f"hierarchy oracle stuck in {module}"
        pending = rest
    return {b: vals[b] for p in mod.port_names if decls[p].kind == "output" for b in decls[p].bits()}


def bits_of(name: str, width: int, value: int) -> dict[str, int]:
    if width == 1:
        return {name: value & 1}
    return {f"{name}.{i}": (value >> i) & 1 for i in range(width)}


def int_of(out: dict[str, int], name: str, width: int) -> int:
    if width == 1:
        return out[name]
    return sum(out[f"{name}.{i}"] << i for i in range(width))


def expected(cls: str, w: int, a: int, b: int, c: int = 0) -> dict[str, int]:
    """Plain integer arithmetic; ``c`` is the carry or borrow in."""
    m = (1 << w) - 1
    if cls == "adder":
        return {"s": (a + b + c) & m, "cout": (a + b + c) >> w}
    if cls == "subtractor":
        return {"d": (a - b - c) & m, "bout": int(a - b - c < 0)}
    if cls == "multiplier":
        return {"p": a * b}
    return {"gt": int(a > b), "eq": int(a == b), "lt": int(a < b)}


def operand_vectors(cls: str, w: int, exhaustive: bool, rng=None, n: int = 64):
    extra = 2 if cls in ("adder", "subtractor") else 1
    if exhaustive:
        yield from itertools.product(range(1 << w), range(1 << w), range(extra))
    else:
        for _ in range(n):
            a, b = (sum(int(x) << i for i, x in enumerate(rng.integers(0, 2, size=w))) for _ in range(2))
            yield a, b, int(rng.integers(extra))


def port_widths(nl, top: str) -> dict[str, int]:
    return {p.name: p.width for p in nl.modules[top].ports}


def flat_of(nl, labelmap=None):
    return flatten(nl, None, find_top(nl), labelmap)


def graph_of(nl, classes=None, labelmap=None):
    return to_graph(flat_of(nl, labelmap), classes)


def check_against_integers(nl, cls: str, w: int, exhaustive: bool = True, seed: int = 0) -> int:
    """Simulate the flat design on every operand vector and compare to integer arithmetic.

    Returns the number of mismatching vectors.
    """
    top = find_top(nl)
    widths = port_widths(nl, top)
    fnl = flatten(nl, None, top)
    cin = {"adder": "cin", "subtractor": "bin"}.get(cls)
    bad = 0
    rng = np.random.default_rng(seed)
    for a, b, c in operand_vectors(cls, w, exhaustive, rng):
        ins = {**bits_of("a", w, a), **bits_of("b", w, b)}
        if cin:
            ins.update(bits_of(cin, 1, c))
        out = simulate(fnl, ins)
        want = expected(cls, w, a, b, c)
        if any(int_of(out, k, widths[k]) != v for k, v in want.items()):
            bad += 1
    return bad


@pytest.fixture
def minimal_buf():
    return parse_netlist("module t(a,y); input a; output y; buf g1 (y, a); endmodule")


@pytest.fixture(scope="session")
def generated():
    """One width-4 design per (class, architecture)."""
    return {(c, a): synth_generate(DesignSpec(c, 4, a)) for c, a in ALL_ARCHS}


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
