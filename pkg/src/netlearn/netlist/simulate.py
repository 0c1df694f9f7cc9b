"""Single-cycle two-valued evaluation of flat netlists."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Mapping

from ..errors import NetlistError
from .ir import FlatGate, FlatNetlist


def eval_gate(function: str, vals: list[int]) -> int:
    if function == "AND":
        return int(all(vals))
    if function == "OR":
        return int(any(vals))
    if function == "NAND":
        return 1 - int(all(vals))
    if function == "NOR":
        return 1 - int(any(vals))
    if function == "XOR":
        return sum(vals) & 1
    if function == "XNOR":
        return 1 - (sum(vals) & 1)
    if function == "NOT":
        return 1 - vals[0]
    if function == "BUF":
        return vals[0]
    if function == "MUX":
        a, b, sel = vals
        return b if sel else a
    raise NetlistError("UNSUPPORTED_FUNCTION", f"cannot evaluate {function} gates")


def topo_order(fnl: FlatNetlist) -> list[FlatGate]:
    """Combinational evaluation order; DFFs come first and act as sources."""
    driver = {g.output: g for g in fnl.gates}
    indeg = {}
    succ: dict[int, list[int]] = {g.gid: [] for g in fnl.gates}
    for g in fnl.gates:
        deps = set()
        if g.function != "DFF":
            for n in g.inputs:
                d = driver.get(n)
                if d is not None and d.function != "DFF":
                    deps.add(d.gid)
        indeg[g.gid] = len(deps)
        for d in deps:
            succ[d].append(g.gid)
    queue = deque(g.gid for g in fnl.gates if indeg[g.gid] == 0)
    order = []
    while queue:
        v = queue.popleft()
        order.append(fnl.gates[v])
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if len(order) != len(fnl.gates):
        raise NetlistError("CYCLE_DETECTED", f"{len(fnl.gates) - len(order)} gate(s) on combinational cycles")
    return order


def simulate(
    fnl: FlatNetlist,
    inputs: Mapping[str, int],
    *,
    order: list[FlatGate] | None = None,
) -> dict[str, int]:
    """Evaluate every primary output for one input assignment.

    DFF outputs read their value from ``inputs`` keyed by the DFF's output
    net (default 0). Pass a precomputed ``order`` to skip re-sorting when
    simulating many vectors.
    """
    missing = [n for n in fnl.primary_inputs if n not in inputs]
    if missing:
        raise NetlistError("UNASSIGNED_PI", f"no value for primary input(s) {', '.join(missing[:5])}")
    values: dict[str, int] = {n: int(inputs[n]) & 1 for n in fnl.primary_inputs}
    # register outputs are state, known before any gate fires
    for g in fnl.gates:
        if g.function == "DFF":
            values[g.output] = int(inputs.get(g.output, 0)) & 1
    for g in order if order is not None else topo_order(fnl):
        if g.function != "DFF":
            values[g.output] = eval_gate(g.function, [values[n] for n in g.inputs])
    return {n: values[n] for n in fnl.primary_outputs}


def bus(name: str, width: int) -> list[str]:
    """Scalar net names of a bus, least significant bit first."""
    return [f"{name}.{i}" for i in range(width)]


def pack(bits: Iterable[int]) -> int:
    """Integer from LSB-first bits."""
    return sum(int(b) << i for i, b in enumerate(bits))


def assign(name: str, width: int, value: int) -> dict[str, int]:
    return {n: (value >> i) & 1 for i, n in enumerate(bus(name, width))}
