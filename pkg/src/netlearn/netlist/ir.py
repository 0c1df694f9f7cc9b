"""In-memory netlist representations.

``Netlist`` is the hierarchical form produced by the parser; ``FlatNetlist``
is the single-level gate list produced by :func:`netlearn.netlist.flatten`.
Buses are elaborated to scalar bits at parse time: ``a[3:0]`` declares the
nets ``a.3, a.2, a.1, a.0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .library import PRIMITIVES


def bit_name(name: str, index: int) -> str:
    return f"{name}.{index}"


@dataclass(frozen=True)
class Decl:
    kind: str  # "input" | "output" | "wire"
    name: str
    msb: int | None = None
    lsb: int | None = None
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    @property
    def width(self) -> int:
        if self.msb is None:
            return 1
        return abs(self.msb - self.lsb) + 1

    def bits(self) -> list[str]:
        """Scalar net names, most significant first."""
        if self.msb is None:
            return [self.name]
        step = -1 if self.msb >= self.lsb else 1
        return [bit_name(self.name, i) for i in range(self.msb, self.lsb + step, step)]


@dataclass(frozen=True)
class Port:
    name: str
    direction: str
    width: int


@dataclass(frozen=True)
class Instance:
    name: str
    target: str
    # (port-name or None for positional, nets most-significant first)
    bindings: tuple[tuple[str | None, tuple[str, ...]], ...]
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    @property
    def is_primitive(self) -> bool:
        return self.target in PRIMITIVES

    @property
    def positional(self) -> bool:
        return all(port is None for port, _ in self.bindings)


@dataclass
class ModuleDef:
    name: str
    port_names: tuple[str, ...]
    decls: list[Decl] = field(default_factory=list)
    instances: list[Instance] = field(default_factory=list)
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def decl_map(self) -> dict[str, Decl]:
        # input/output take precedence over a redundant "wire" for the same name
        out: dict[str, Decl] = {}
        for d in self.decls:
            if d.name not in out or out[d.name].kind == "wire":
                out[d.name] = d
        return out

    @property
    def ports(self) -> list[Port]:
        decls = self.decl_map()
        ports = []
        for name in self.port_names:
            d = decls.get(name)
            if d is not None and d.kind in ("input", "output"):
                ports.append(Port(name, d.kind, d.width))
        return ports

    def port_bits(self, direction: str) -> list[str]:
        decls = self.decl_map()
        bits: list[str] = []
        for name in self.port_names:
            d = decls.get(name)
            if d is not None and d.kind == direction:
                bits.extend(d.bits())
        return bits

    @property
    def nets(self) -> list[str]:
        seen: dict[str, None] = {}
        for d in self.decls:
            for b in d.bits():
                seen.setdefault(b, None)
        return list(seen)


@dataclass
class Netlist:
    modules: dict[str, ModuleDef] = field(default_factory=dict)

    def __getitem__(self, name: str) -> ModuleDef:
        return self.modules[name]

    def __contains__(self, name: str) -> bool:
        return name in self.modules

    def add(self, module: ModuleDef) -> ModuleDef:
        self.modules[module.name] = module
        return module


@dataclass(frozen=True)
class FlatGate:
    gid: int
    name: str
    function: str
    inputs: tuple[str, ...]
    output: str
    path: tuple[str, ...]
    label: str
    cell: str = ""  # primitive keyword or library cell name

    def with_function(self, function: str, cell: str) -> FlatGate:
        return FlatGate(self.gid, self.name, function, self.inputs, self.output, self.path, self.label, cell)


@dataclass
class FlatNetlist:
    name: str
    gates: list[FlatGate]
    nets: list[str]
    primary_inputs: list[str]
    primary_outputs: list[str]
    ports: list[Decl] = field(default_factory=list)

    @property
    def labels(self) -> list[str]:
        return [g.label for g in self.gates]

    def drivers(self) -> dict[str, int]:
        return {g.output: g.gid for g in self.gates}

    def readers(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for g in self.gates:
            for n in dict.fromkeys(g.inputs):
                out.setdefault(n, []).append(g.gid)
        return out
