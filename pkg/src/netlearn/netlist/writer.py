from __future__ import annotations

from .ir import Decl, FlatNetlist, Instance, ModuleDef, Netlist
from .library import KEYWORD_OF


def _decl_text(d: Decl) -> str:
    rng = f" [{d.msb}:{d.lsb}]" if d.msb is not None else ""
    return f"  {d.kind}{rng} {d.name};"


def _nets_text(nets: tuple[str, ...]) -> str:
    if len(nets) == 1:
        return nets[0]
    return "{" + ", ".join(nets) + "}"


def _instance_text(inst: Instance) -> str:
    parts = []
    for port, nets in inst.bindings:
        if port is None:
            parts.append(_nets_text(nets))
        else:
            parts.append(f".{port}({_nets_text(nets) if nets else ''})")
    return f"  {inst.target} {inst.name} ({', '.join(parts)});"


def _module_text(mod: ModuleDef) -> str:
    lines = [f"module {mod.name} ({', '.join(mod.port_names)});"]
    lines.extend(_decl_text(d) for d in mod.decls)
    lines.extend(_instance_text(i) for i in mod.instances)
    lines.append("endmodule")
    return "\n".join(lines)


def write_netlist(nl: Netlist) -> str:
    """Serialize a netlist; ``parse_netlist`` of the result equals ``nl``."""
    return "".join(_module_text(m) + "\n\n" for m in nl.modules.values())


def flat_to_netlist(fnl: FlatNetlist, name: str | None = None) -> Netlist:
    """Re-express a flat netlist as a single-module :class:`Netlist`.

    Top-level port declarations are kept; every other net becomes a scalar
    wire. Gates keep their flattened names and cell types.
    """
    name = name or fnl.name
    decls = [Decl(d.kind, d.name, d.msb, d.lsb) for d in fnl.ports]
    declared = {b for d in decls for b in d.bits()}
    decls += [Decl("wire", n) for n in fnl.nets if n not in declared]
    instances = []
    for g in fnl.gates:
        cell = g.cell or KEYWORD_OF.get(g.function, g.function)
        pins = ((None, (g.output,)),) + tuple((None, (n,)) for n in g.inputs)
        instances.append(Instance(g.name, cell, pins))
    mod = ModuleDef(name, tuple(d.name for d in fnl.ports), decls, instances)
    return Netlist({name: mod})
