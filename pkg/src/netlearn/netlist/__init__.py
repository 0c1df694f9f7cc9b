"""Gate-level netlist front end: parse, lint, flatten, simulate, write."""

from .flatten import flatten, label_for
from .ir import Decl, FlatGate, FlatNetlist, Instance, ModuleDef, Netlist, Port
from .library import (
    FUNCTIONS,
    PRIMITIVES,
    CellDef,
    CellLibrary,
    default_library,
    load_cell_library,
)
from .lint import CODES, Diagnostic, LintReport, find_comb_loops, lint_netlist
from .parser import load_label_map, parse_netlist, tokenize
from .simulate import assign, bus, pack, simulate, topo_order
from .writer import flat_to_netlist, write_netlist

__all__ = [
    "CODES",
    "FUNCTIONS",
    "PRIMITIVES",
    "CellDef",
    "CellLibrary",
    "Decl",
    "Diagnostic",
    "FlatGate",
    "FlatNetlist",
    "Instance",
    "LintReport",
    "ModuleDef",
    "Netlist",
    "Port",
    "assign",
    "bus",
    "default_library",
    "find_comb_loops",
    "flat_to_netlist",
    "flatten",
    "label_for",
    "lint_netlist",
    "load_cell_library",
    "load_label_map",
    "pack",
    "parse_netlist",
    "simulate",
    "tokenize",
    "topo_order",
    "write_netlist",
]
