from __future__ import annotations

import math

import numpy as np

from ..netlist.flatten import flatten
from ..netlist.ir import Netlist
from ..netlist.library import KEYWORD_OF, CellLibrary
from ..netlist.writer import flat_to_netlist

# Arity-preserving swap families.
FAMILIES = (("AND", "OR", "NAND", "NOR"), ("XOR", "XNOR"), ("NOT", "BUF"))
_FAMILY_OF = {f: fam for fam in FAMILIES for f in fam}


def corrupt(nl: Netlist, rate: float, seed: int, *, top: str | None = None, lib: CellLibrary | None = None) -> Netlist:
    """Swap the function of ``ceil(rate * gates)`` gates, keeping every net.

    The design is flattened first so that each swap touches exactly one gate
    instance; the result is a single-module netlist with the same top name,
    ports and connectivity. Only AND/OR/NAND/NOR, XOR/XNOR and NOT/BUF gates
    are eligible; the count is capped at the number of eligible gates.
    """
    if not 0 < rate <= 1:
        raise ValueError(f"corruption rate must be in (0, 1], got {rate}")
    top = top or list(nl.modules)[-1]
    fnl = flatten(nl, lib, top)
    rng = np.random.default_rng(seed)
    eligible = [g.gid for g in fnl.gates if g.function in _FAMILY_OF]
    count = min(math.ceil(rate * len(fnl.gates)), len(eligible))
    chosen = rng.choice(len(eligible), size=count, replace=False) if count else []
    gates = list(fnl.gates)
    for idx in sorted(int(i) for i in chosen):
        g = gates[eligible[idx]]
        options = [f for f in _FAMILY_OF[g.function] if f != g.function]
        new = options[int(rng.integers(len(options)))]
        gates[g.gid] = g.with_function(new, KEYWORD_OF[new])
    fnl.gates = gates
    return flat_to_netlist(fnl, top)
