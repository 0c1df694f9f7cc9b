"""Recursive-descent parser for the structural netlist subset.

Grammar (whitespace-insensitive, ``//`` and ``/* */`` comments)::

    module NAME (p1, p2, ...);
        input|output|wire [M:N]? name (, name)*;
        and|or|nand|nor|xor|xnor|not|buf|mux|dff INST (out, in1, ...);
        TARGET INST (.port(net), ...);      // or positional (net, ...)
    endmodule

Nets in bindings may be ``name``, ``name[k]``, ``name[m:n]`` or a
concatenation ``{a, b[1], ...}``. Whole-bus references are expanded using
the module's declarations, which may appear after their first use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import NetlistError
from .ir import Decl, Instance, ModuleDef, Netlist, bit_name
from .library import CellLibrary

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<number>\d+)
  | (?P<sym>[();,\[\]:.{}])
    """,
    re.VERBOSE | re.DOTALL,
)

KEYWORDS = {"module", "endmodule", "input", "output", "wire"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise NetlistError(
                "SYNTAX_ERROR", f"unexpected character {text[pos]!r}", line=line, column=pos - line_start + 1
            )
        kind = m.lastgroup
        chunk = m.group()
        if kind in ("ident", "number", "sym"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# A net reference before bus elaboration: (name, msb, lsb); msb None = whole name.
_Ref = tuple[str, "int | None", "int | None"]


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, tok: Token | None = None) -> NetlistError:
        tok = tok or self.tok
        where = "end of input" if tok.kind == "eof" else repr(tok.text)
        return NetlistError("SYNTAX_ERROR", f"{message} at {where}", line=tok.line, column=tok.column)

    def expect_sym(self, sym: str) -> Token:
        tok = self.tok
        if tok.kind != "sym" or tok.text != sym:
            raise self.error(f"expected {sym!r}")
        self.i += 1
        return tok

    def accept_sym(self, sym: str) -> bool:
        if self.tok.kind == "sym" and self.tok.text == sym:
            self.i += 1
            return True
        return False

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.tok
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected {what}")
        self.i += 1
        return tok

    def expect_number(self) -> int:
        tok = self.tok
        if tok.kind != "number":
            raise self.error("expected number")
        self.i += 1
        return int(tok.text)

    def parse(self) -> Netlist:
        nl = Netlist()
        while self.tok.kind != "eof":
            tok = self.tok
            if tok.kind != "ident" or tok.text != "module":
                raise self.error("expected 'module'")
            mod = self.parse_module()
            if mod.name in nl.modules:
                raise NetlistError("SYNTAX_ERROR", f"module {mod.name} defined twice", line=tok.line, column=tok.column)
            nl.add(mod)
        return nl

    def parse_module(self) -> ModuleDef:
        start = self.tok
        self.i += 1
        name = self.expect_ident("module name").text
        ports: list[str] = []
        if self.accept_sym("("):
            if not self.accept_sym(")"):
                ports.append(self.expect_ident("port name").text)
                while self.accept_sym(","):
                    ports.append(self.expect_ident("port name").text)
                self.expect_sym(")")
        self.expect_sym(";")
        decls: list[Decl] = []
        raw_instances: list[tuple[Token, Token, list[tuple[str | None, list[_Ref]]]]] = []
        while True:
            tok = self.tok
            if tok.kind == "eof":
                raise self.error("missing 'endmodule'")
            if tok.kind == "ident" and tok.text == "endmodule":
                self.i += 1
                break
            if tok.kind == "ident" and tok.text in ("input", "output", "wire"):
                decls.extend(self.parse_decl())
            elif tok.kind == "ident" and tok.text not in KEYWORDS:
                raw_instances.append(self.parse_instance())
            else:
                raise self.error("expected declaration, instance or 'endmodule'")
        mod = ModuleDef(name, tuple(ports), decls, [], line=start.line, column=start.column)
        widths = {d.name: d for d in mod.decls}
        for target, inst, bindings in raw_instances:
            elaborated = tuple((port, tuple(self._expand(refs, widths))) for port, refs in bindings)
            mod.instances.append(Instance(inst.text, target.text, elaborated, line=inst.line, column=inst.column))
        return mod

    @staticmethod
    def _expand(refs: list[_Ref], decls: dict[str, Decl]) -> list[str]:
        nets: list[str] = []
        for name, msb, lsb in refs:
            if msb is None:
                d = decls.get(name)
                nets.extend(d.bits() if d is not None else [name])
            elif lsb is None:
                nets.append(bit_name(name, msb))
            else:
                step = -1 if msb >= lsb else 1
                nets.extend(bit_name(name, k) for k in range(msb, lsb + step, step))
        return nets

    def parse_range(self) -> tuple[int | None, int | None]:
        if not self.accept_sym("["):
            return None, None
        msb = self.expect_number()
        self.expect_sym(":")
        lsb = self.expect_number()
        self.expect_sym("]")
        return msb, lsb

    def parse_decl(self) -> list[Decl]:
        kind = self.tok.text
        self.i += 1
        msb, lsb = self.parse_range()
        out = []
        while True:
            tok = self.expect_ident("net name")
            out.append(Decl(kind, tok.text, msb, lsb, line=tok.line, column=tok.column))
            if not self.accept_sym(","):
                break
        self.expect_sym(";")
        return out

    def parse_ref(self) -> _Ref:
        name = self.expect_ident("net name").text
        if not self.accept_sym("["):
            return (name, None, None)
        msb = self.expect_number()
        lsb = None
        if self.accept_sym(":"):
            lsb = self.expect_number()
        self.expect_sym("]")
        return (name, msb, lsb)

    def parse_expr(self) -> list[_Ref]:
        if self.accept_sym("{"):
            refs = [self.parse_ref()]
            while self.accept_sym(","):
                refs.append(self.parse_ref())
            self.expect_sym("}")
            return refs
        return [self.parse_ref()]

    def parse_instance(self):
        target = self.tok
        self.i += 1
        inst = self.expect_ident("instance name")
        self.expect_sym("(")
        bindings: list[tuple[str | None, list[_Ref]]] = []
        if not self.accept_sym(")"):
            named = self.tok.kind == "sym" and self.tok.text == "."
            while True:
                if named:
                    self.expect_sym(".")
                    port = self.expect_ident("port name").text
                    self.expect_sym("(")
                    refs: list[_Ref] = []
                    if not (self.tok.kind == "sym" and self.tok.text == ")"):
                        refs = self.parse_expr()
                    self.expect_sym(")")
                    bindings.append((port, refs))
                else:
                    bindings.append((None, self.parse_expr()))
                if not self.accept_sym(","):
                    break
            self.expect_sym(")")
        self.expect_sym(";")
        return target, inst, bindings


def parse_netlist(text: str, lib: CellLibrary | None = None) -> Netlist:
    """Parse netlist source into a :class:`Netlist`.

    Only syntax is checked here; unresolved targets, undeclared nets and
    the like are left for :func:`lint_netlist`. ``lib`` is accepted for
    interface symmetry with the other stages and is not consulted.
    """
    return _Parser(text).parse()


def load_label_map(text: str) -> dict[str, str]:
    """Parse ``PREFIX CLASS`` lines (``#`` comments allowed)."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise NetlistError("FORMAT_ERROR", f"expected 'PREFIX CLASS', got {raw.strip()!r}", line=lineno)
        out[parts[0]] = parts[1]
    return out
