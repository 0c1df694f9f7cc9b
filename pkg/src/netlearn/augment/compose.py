"""Multi-block flattened designs with per-gate block labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..netlist.flatten import flatten
from ..netlist.ir import Decl, FlatNetlist, Instance, ModuleDef, Netlist
from ..netlist.library import PRIMITIVES, CellLibrary


def find_top(nl: Netlist) -> str:
    """The module no other module instantiates (the last such one if several)."""
    used = {i.target for m in nl.modules.values() for i in m.instances}
    roots = [name for name in nl.modules if name not in used]
    if not roots:
        return list(nl.modules)[-1]
    return roots[-1]


def merge_netlists(parts: list[Netlist]) -> tuple[Netlist, list[dict[str, str]]]:
    """Union of module sets; clashing names with different bodies get a ``__bN`` suffix.

    Returns the merged netlist and, per part, the old->new module renames.
    """
    merged = Netlist()
    renames: list[dict[str, str]] = []
    for idx, part in enumerate(parts):
        rename: dict[str, str] = {}
        for name, mod in part.modules.items():
            if name in merged.modules and merged.modules[name] != mod:
                rename[name] = f"{name}__b{idx}"
        # renaming changes bodies that reference renamed modules, so compare after rewrite
        for name, mod in part.modules.items():
            new_name = rename.get(name, name)
            instances = [
                Instance(i.name, rename.get(i.target, i.target) if i.target not in PRIMITIVES else i.target, i.bindings)
                for i in mod.instances
            ]
            body = ModuleDef(new_name, mod.port_names, list(mod.decls), instances)
            if new_name in merged.modules:
                if merged.modules[new_name] == body:
                    continue
                new_name = f"{name}__b{idx}"
                rename[name] = new_name
                body.name = new_name
            merged.add(body)
        renames.append(rename)
    return merged, renames


@dataclass
class ComposedDesign:
    netlist: Netlist
    top: str
    labelmap: dict[str, str]
    flat: FlatNetlist


def compose_design(
    blocks: list[tuple[str, Netlist]],
    glue_prob: float = 0.3,
    seed: int = 0,
    name: str = "soc",
    lib: CellLibrary | None = None,
) -> ComposedDesign:
    """Instantiate ``blocks`` under a fresh top and wire them together.

    Each block input port, with probability ``glue_prob``, is driven by an
    equal-width output port of an earlier block; otherwise it becomes a new
    top-level input. Block outputs nothing reads become top-level outputs.
    """
    rng = np.random.default_rng(seed)
    tops = [find_top(nl) for _, nl in blocks]
    merged, renames = merge_netlists([nl for _, nl in blocks])
    tops = [renames[i].get(t, t) for i, t in enumerate(tops)]
    if name in merged.modules:
        name = f"{name}_top"

    inst_names = [f"{cls}_{i}" for i, (cls, _) in enumerate(blocks)]
    labelmap = {f"{cls}_": cls for cls, _ in blocks}
    available: list[tuple[int, str, int]] = []  # (block, port, width) of earlier outputs
    consumed: set[tuple[int, str]] = set()
    bindings: list[list[tuple[str, tuple[str, ...]]]] = []
    top_inputs: list[Decl] = []
    for bi, top in enumerate(tops):
        mod = merged.modules[top]
        decls = mod.decl_map()
        b: list[tuple[str, tuple[str, ...]]] = []
        for port in mod.port_names:
            d = decls[port]
            if d.kind != "input":
                continue
            choices = [a for a in available if a[2] == d.width]
            if choices and rng.random() < glue_prob:
                src_block, src_port, _ = choices[int(rng.integers(len(choices)))]
                consumed.add((src_block, src_port))
                b.append((port, tuple(_bus_bits(f"{inst_names[src_block]}_{src_port}", d.width))))
            else:
                pi = f"{inst_names[bi]}_{port}"
                top_inputs.append(Decl("input", pi, d.width - 1 if d.width > 1 else None, 0 if d.width > 1 else None))
                b.append((port, tuple(_bus_bits(pi, d.width))))
        bindings.append(b)
        for port in mod.port_names:
            d = decls[port]
            if d.kind == "output":
                available.append((bi, port, d.width))

    top_outputs: list[Decl] = []
    wires: list[Decl] = []
    instances: list[Instance] = []
    for bi, top in enumerate(tops):
        mod = merged.modules[top]
        decls = mod.decl_map()
        b = bindings[bi]
        for port in mod.port_names:
            d = decls[port]
            if d.kind != "output":
                continue
            net = f"{inst_names[bi]}_{port}"
            rng_ = (d.width - 1, 0) if d.width > 1 else (None, None)
            decl = Decl("wire" if (bi, port) in consumed else "output", net, *rng_)
            (wires if (bi, port) in consumed else top_outputs).append(decl)
            b.append((port, tuple(_bus_bits(net, d.width))))
        instances.append(Instance(inst_names[bi], top, tuple(b)))

    ports = top_inputs + top_outputs
    merged.add(ModuleDef(name, tuple(d.name for d in ports), ports + wires, instances))
    flat = flatten(merged, lib, name, labelmap)
    return ComposedDesign(merged, name, labelmap, flat)


def _bus_bits(name: str, width: int) -> list[str]:
    # MSB first, matching Decl.bits()
    if width == 1:
        return [name]
    return [f"{name}.{i}" for i in range(width - 1, -1, -1)]


def compose_flat_design(
    blocks: list[tuple[str, Netlist]], glue_prob: float = 0.3, seed: int = 0, name: str = "soc"
) -> FlatNetlist:
    return compose_design(blocks, glue_prob, seed, name).flat
