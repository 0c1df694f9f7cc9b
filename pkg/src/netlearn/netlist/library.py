"""Cell library: cell name -> (function tag, input count)."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import NetlistError

# Fixed function vocabulary; index order is the one-hot layout used by graph features.
FUNCTIONS = ("AND", "OR", "NAND", "NOR", "XOR", "XNOR", "NOT", "BUF", "MUX", "DFF", "OTHER")

FIXED_ARITY = {"NOT": 1, "BUF": 1, "DFF": 1, "MUX": 3}

# Built-in primitive keywords of the netlist grammar.
PRIMITIVES = {
    "and": "AND",
    "or": "OR",
    "nand": "NAND",
    "nor": "NOR",
    "xor": "XOR",
    "xnor": "XNOR",
    "not": "NOT",
    "buf": "BUF",
    "mux": "MUX",
    "dff": "DFF",
}
KEYWORD_OF = {tag: kw for kw, tag in PRIMITIVES.items()}


@dataclass(frozen=True)
class CellDef:
    name: str
    function: str
    arity: int


@dataclass
class CellLibrary:
    entries: dict[str, CellDef] = field(default_factory=dict)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __getitem__(self, name: str) -> CellDef:
        return self.entries[name]

    def __len__(self) -> int:
        return len(self.entries)


def check_arity(function: str, n_inputs: int) -> bool:
    """True when ``n_inputs`` is a legal input count for ``function``."""
    if function in FIXED_ARITY:
        return n_inputs == FIXED_ARITY[function]
    if function == "OTHER":
        return n_inputs >= 0
    return n_inputs >= 2


def load_cell_library(text: str) -> CellLibrary:
    lib = CellLibrary()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise NetlistError("FORMAT_ERROR", f"expected 'NAME FUNCTION ARITY', got {raw.strip()!r}", line=lineno)
        name, function, arity_text = parts
        if function not in FUNCTIONS:
            raise NetlistError("UNKNOWN_FUNCTION_TAG", f"unknown function {function!r} for cell {name}", line=lineno)
        try:
            arity = int(arity_text)
        except ValueError:
            raise NetlistError("BAD_ARITY", f"arity {arity_text!r} is not an integer", line=lineno) from None
        if arity < 1 or not check_arity(function, arity):
            raise NetlistError("BAD_ARITY", f"{function} cannot take {arity} inputs (cell {name})", line=lineno)
        if name in lib.entries:
            raise NetlistError("DUPLICATE_CELL", f"cell {name} defined twice", line=lineno)
        lib.entries[name] = CellDef(name, function, arity)
    return lib


def default_library() -> CellLibrary:
    """A small library of named two-input cells plus the fixed-arity ones."""
    text = "\n".join(
        [
            "AND2 AND 2",
            "OR2 OR 2",
            "NAND2 NAND 2",
            "NOR2 NOR 2",
            "XOR2 XOR 2",
            "XNOR2 XNOR 2",
            "INV NOT 1",
            "BUFX BUF 1",
            "MUX2 MUX 3",
            "DFFX DFF 1",
        ]
    )
    return load_cell_library(text)
