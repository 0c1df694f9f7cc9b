from __future__ import annotations

from ..errors import NetlistError
from .ir import FlatGate, FlatNetlist, Netlist
from .library import CellLibrary


def label_for(path: tuple[str, ...], gate_name: str, labelmap: dict[str, str] | None) -> str:
    """Class label of a gate: longest label-map prefix of its first instance below top.

    Gates instantiated directly in the top module are keyed by their own
    instance name. Unmatched keys get ``"OTHER"``.
    """
    if not labelmap:
        return "OTHER"
    key = path[1] if len(path) > 1 else gate_name
    best = None
    for prefix in labelmap:
        if key.startswith(prefix) and (best is None or len(prefix) > len(best)):
            best = prefix
    return labelmap[best] if best is not None else "OTHER"


def flatten(
    nl: Netlist,
    lib: CellLibrary | None,
    top: str,
    labelmap: dict[str, str] | None = None,
    *,
    check: bool = True,
) -> FlatNetlist:
    """Inline the hierarchy under ``top`` into a list of primitive gates.

    Nets below the top are renamed ``inst1.inst2.local``; gate names follow
    the same scheme. Each gate's ``path`` is ``(top, inst1, inst2, ...)``,
    the chain of module instances that contains it.
    """
    from .lint import lint_netlist, resolve_instance

    if top not in nl.modules:
        raise NetlistError("UNKNOWN_TOP", f"top module {top!r} not found")
    if check:
        report = lint_netlist(nl, lib, top)
        if not report.ok:
            first = report.errors[0]
            raise NetlistError(
                "LINT_ERRORS_PRESENT", f"{len(report.errors)} lint error(s), first: {first.code} at {first.location}"
            )

    gates: list[FlatGate] = []
    nets: dict[str, None] = {}
    top_mod = nl.modules[top]

    def expand(mod_name: str, prefix: tuple[str, ...], netmap: dict[str, str]) -> None:
        mod = nl.modules[mod_name]
        for n in mod.nets:
            if n not in netmap:
                netmap[n] = ".".join(prefix + (n,))
            nets.setdefault(netmap[n], None)
        for inst in mod.instances:
            r = resolve_instance(inst, mod, nl, lib)
            if r is None:
                raise NetlistError("LINT_ERRORS_PRESENT", f"cannot resolve instance {inst.name} in {mod_name}")
            ins = [netmap.get(n, n) for n in r.inputs]
            if r.module is None:
                path = (top,) + prefix
                out = netmap.get(r.outputs[0], r.outputs[0])
                name = ".".join(prefix + (inst.name,))
                label = label_for(path, inst.name, labelmap)
                gates.append(FlatGate(len(gates), name, r.function, tuple(ins), out, path, label, r.cell))
                continue
            child_prefix = prefix + (inst.name,)
            child_map: dict[str, str] = {}
            for bit, parent_net in r.port_map.items():
                if parent_net is not None:
                    child_map[bit] = netmap.get(parent_net, parent_net)
            expand(r.module, child_prefix, child_map)

    expand(top, (), {})
    ports = [d for d in top_mod.decls if d.name in top_mod.port_names and d.kind in ("input", "output")]
    return FlatNetlist(
        name=top,
        gates=gates,
        nets=list(nets),
        primary_inputs=top_mod.port_bits("input"),
        primary_outputs=top_mod.port_bits("output"),
        ports=ports,
    )
