"""Structural checks that gate flattening and simulation.

The linter plays the role of the synthesizer's error log in the generation
loop: it reports unresolved references, undeclared or undriven nets,
multiple drivers, floating ports, combinational loops and arity errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import NetlistError
from .ir import Instance, ModuleDef, Netlist
from .library import PRIMITIVES, CellLibrary, check_arity

CODES = (
    "UNRESOLVED_REF",
    "UNDECLARED_NET",
    "UNDRIVEN_NET",
    "MULTI_DRIVER",
    "FLOATING_PORT",
    "COMB_LOOP",
    "ARITY_MISMATCH",
)

OUTPUT_PIN_NAMES = {"Y", "Z", "Q", "O", "OUT"}


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    location: str
    message: str
    sort_key: tuple = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"severity": self.severity, "code": self.code, "location": self.location, "message": self.message}

    def __str__(self) -> str:
        return f"{self.location}: {self.severity}: {self.code}: {self.message}"


@dataclass
class LintReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self, severity: str | None = None) -> list[str]:
        return [d.code for d in self.diagnostics if severity is None or d.severity == severity]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "diagnostics": [d.to_dict() for d in self.diagnostics]}

    def format(self) -> str:
        lines = [str(d) for d in self.diagnostics]
        lines.append(f"{len(self.errors)} error(s), {len(self.warnings)} warning(s)")
        return "\n".join(lines)


@dataclass
class Resolved:
    """An instance with its pins sorted into driven and read nets."""

    inst: Instance
    function: str | None  # leaf gate function, None for module instances
    cell: str
    outputs: list[str]
    inputs: list[str]
    module: str | None = None
    # child port bit -> parent net (None when left unconnected)
    port_map: dict[str, str | None] = field(default_factory=dict)


class _Sink:
    def __init__(self):
        self.items: list[Diagnostic] = []

    def add(self, severity: str, code: str, mod: ModuleDef, line: int, column: int, message: str) -> None:
        loc = f"{mod.name}:{line}:{column}"
        self.items.append(Diagnostic(severity, code, loc, message, (mod.name, line, column, code, message)))


def resolve_instance(
    inst: Instance, mod: ModuleDef, nl: Netlist, lib: CellLibrary | None, sink: _Sink | None = None
) -> Resolved | None:
    """Classify an instance's pins; report problems to ``sink`` if given.

    Returns ``None`` when the instance cannot be interpreted at all.
    """

    def report(severity: str, code: str, message: str) -> None:
        if sink is not None:
            sink.add(severity, code, mod, inst.line, inst.column, message)

    target = inst.target
    if target in PRIMITIVES or (target not in nl.modules and lib is not None and target in lib):
        return _resolve_gate(inst, lib, report)
    if target in nl.modules:
        return _resolve_module(inst, nl.modules[target], report)
    report("error", "UNRESOLVED_REF", f"instance {inst.name} references undefined cell or module {target!r}")
    return None


def _resolve_gate(inst: Instance, lib: CellLibrary | None, report) -> Resolved | None:
    if inst.target in PRIMITIVES:
        function, arity = PRIMITIVES[inst.target], None
    else:
        cell = lib[inst.target]
        function, arity = cell.function, cell.arity
    ok = True
    for port, nets in inst.bindings:
        if not nets:
            report("error", "FLOATING_PORT", f"pin {port} of {inst.name} is unconnected")
            ok = False
        elif len(nets) != 1:
            report("error", "ARITY_MISMATCH", f"pin of {inst.name} bound to {len(nets)} bits; cell pins are 1 bit")
            ok = False
    if not ok:
        return None
    if not inst.bindings:
        report("error", "ARITY_MISMATCH", f"{inst.name} has no connections")
        return None
    if inst.positional:
        output = inst.bindings[0][1][0]
        inputs = [nets[0] for _, nets in inst.bindings[1:]]
    elif inst.target in PRIMITIVES:
        report("error", "ARITY_MISMATCH", f"primitive {inst.target} {inst.name} must use positional pins")
        return None
    else:
        outs = [nets[0] for port, nets in inst.bindings if port is not None and port.upper() in OUTPUT_PIN_NAMES]
        if len(outs) != 1:
            report("error", "ARITY_MISMATCH", f"{inst.name} needs exactly one output pin, found {len(outs)}")
            return None
        output = outs[0]
        inputs = [nets[0] for port, nets in inst.bindings if port is None or port.upper() not in OUTPUT_PIN_NAMES]
    legal = check_arity(function, len(inputs)) if arity is None else len(inputs) == arity
    if not legal:
        report("error", "ARITY_MISMATCH", f"{inst.target} {inst.name} has {len(inputs)} input(s)")
        return None
    return Resolved(inst, function, inst.target, [output], inputs)


def _resolve_module(inst: Instance, child: ModuleDef, report) -> Resolved | None:
    decls = child.decl_map()
    ports = [p for p in child.port_names if p in decls and decls[p].kind in ("input", "output")]
    bound: dict[str, tuple[str, ...]] = {}
    ok = True
    if inst.positional:
        if len(inst.bindings) != len(ports):
            report("error", "ARITY_MISMATCH", f"{inst.name} binds {len(inst.bindings)} of {len(ports)} ports")
            return None
        bound = {p: nets for p, (_, nets) in zip(ports, inst.bindings)}
    else:
        for port, nets in inst.bindings:
            if port is None:
                report("error", "ARITY_MISMATCH", f"{inst.name} mixes positional and named pins")
                return None
            if port not in ports:
                report("error", "UNRESOLVED_REF", f"module {child.name} has no port {port!r} (instance {inst.name})")
                ok = False
                continue
            if port in bound:
                report("error", "ARITY_MISMATCH", f"port {port} of {inst.name} bound twice")
                ok = False
                continue
            bound[port] = nets
    outputs: list[str] = []
    inputs: list[str] = []
    port_map: dict[str, str | None] = {}
    for p in ports:
        d = decls[p]
        nets = bound.get(p, ())
        if not nets:
            if d.kind == "input":
                report("error", "FLOATING_PORT", f"input port {p} of {inst.name} is unconnected")
                ok = False
            else:
                report("warning", "FLOATING_PORT", f"output port {p} of {inst.name} is unconnected")
                port_map.update({b: None for b in d.bits()})
            continue
        if len(nets) != d.width:
            report("error", "ARITY_MISMATCH", f"port {p} of {inst.name} is {d.width} bit(s), bound to {len(nets)}")
            ok = False
            continue
        for b, n in zip(d.bits(), nets):
            port_map[b] = n
            (inputs if d.kind == "input" else outputs).append(n)
    if not ok:
        return None
    return Resolved(inst, None, inst.target, outputs, inputs, module=child.name, port_map=port_map)


def _reachable(nl: Netlist, top: str, sink: _Sink) -> list[str]:
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(name: str) -> None:
        state[name] = 1
        mod = nl.modules[name]
        for inst in mod.instances:
            t = inst.target
            if t not in nl.modules or t in PRIMITIVES:
                continue
            if state.get(t) == 1:
                sink.add("error", "UNRESOLVED_REF", mod, inst.line, inst.column, f"recursive instantiation of {t}")
            elif t not in state:
                visit(t)
        state[name] = 2
        order.append(name)

    visit(top)
    return order


def _check_module(mod: ModuleDef, nl: Netlist, lib: CellLibrary | None, sink: _Sink, is_top: bool) -> None:
    decls = mod.decl_map()
    declared = set(mod.nets)
    seen_inst: set[str] = set()
    for p in mod.port_names:
        d = decls.get(p)
        if d is None or d.kind == "wire":
            sink.add("error", "UNDECLARED_NET", mod, mod.line, mod.column, f"port {p} has no input/output declaration")
    drivers: dict[str, list[tuple[str, int, int]]] = {}
    readers: dict[str, list[tuple[str, int, int]]] = {}
    opaque: set[str] = set()  # nets of instances that failed to resolve; their pins are unknown
    for b in mod.port_bits("input"):
        drivers.setdefault(b, []).append(("port", mod.line, mod.column))
    for b in mod.port_bits("output"):
        readers.setdefault(b, []).append(("port", mod.line, mod.column))
    for inst in mod.instances:
        if inst.name in seen_inst:
            sink.add("error", "UNRESOLVED_REF", mod, inst.line, inst.column, f"instance name {inst.name} is ambiguous")
        seen_inst.add(inst.name)
        reported: set[str] = set()
        for _, nets in inst.bindings:
            for n in nets:
                if n not in declared and n not in reported:
                    reported.add(n)
                    sink.add("error", "UNDECLARED_NET", mod, inst.line, inst.column, f"net {n} is not declared")
        r = resolve_instance(inst, mod, nl, lib, sink)
        if r is None:
            opaque.update(n for _, nets in inst.bindings for n in nets)
            continue
        for n in r.outputs:
            drivers.setdefault(n, []).append((inst.name, inst.line, inst.column))
        for n in r.inputs:
            readers.setdefault(n, []).append((inst.name, inst.line, inst.column))
    for n, ds in drivers.items():
        if len(ds) > 1 and n in declared:
            who = ", ".join(d[0] for d in ds)
            sink.add("error", "MULTI_DRIVER", mod, ds[1][1], ds[1][2], f"net {n} has {len(ds)} drivers ({who})")
    for n, rs in readers.items():
        if n in declared and n not in drivers and n not in opaque:
            sink.add("error", "UNDRIVEN_NET", mod, rs[0][1], rs[0][2], f"net {n} is read but never driven")
    if not is_top:
        for b in mod.port_bits("input"):
            if b not in readers and b not in opaque:
                sink.add("warning", "FLOATING_PORT", mod, mod.line, mod.column, f"input {b} is never read")


def find_comb_loops(gates) -> list[list[int]]:
    """Strongly connected gate sets forming combinational cycles.

    Edges leaving a DFF are ignored, so registered feedback is not a loop.
    ``gates`` is a sequence of :class:`FlatGate`. Iterative Tarjan.
    """
    driver = {g.output: g.gid for g in gates}
    succ: dict[int, list[int]] = {g.gid: [] for g in gates}
    self_loop: set[int] = set()
    for g in gates:
        for n in g.inputs:
            d = driver.get(n)
            if d is None or gates[d].function == "DFF":
                continue
            if d == g.gid:
                self_loop.add(d)
            succ[d].append(g.gid)
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for root in succ:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            recurse = False
            nbrs = succ[v]
            while i < len(nbrs):
                w = nbrs[i]
                i += 1
                if w not in index:
                    work.append((v, i))
                    work.append((w, 0))
                    recurse = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in self_loop:
                    sccs.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return sorted(sccs)


def lint_netlist(nl: Netlist, lib: CellLibrary | None, top: str) -> LintReport:
    if top not in nl.modules:
        raise NetlistError("UNKNOWN_TOP", f"top module {top!r} not found")
    sink = _Sink()
    for name in _reachable(nl, top, sink):
        _check_module(nl.modules[name], nl, lib, sink, is_top=(name == top))
    if not any(d.severity == "error" for d in sink.items):
        from .flatten import flatten

        fnl = flatten(nl, lib, top, check=False)
        top_mod = nl.modules[top]
        by_name = {i.name: i for i in top_mod.instances}
        for comp in find_comb_loops(fnl.gates):
            first = fnl.gates[comp[0]]
            owner = first.path[1] if len(first.path) > 1 else first.name
            inst = by_name.get(owner)
            line, col = (inst.line, inst.column) if inst else (top_mod.line, top_mod.column)
            names = [fnl.gates[i].name for i in comp]
            shown = ", ".join(names[:6]) + (" ..." if len(names) > 6 else "")
            sink.add("error", "COMB_LOOP", top_mod, line, col, f"combinational cycle through {shown}")
    diags = sorted(set(sink.items), key=lambda d: d.sort_key)
    return LintReport(diags)
