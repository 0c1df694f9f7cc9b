"""Deterministic gate-level generators for arithmetic operator families.

Every generator returns a hierarchical :class:`Netlist` whose top module is
lint-clean and functionally exact. No constants are needed: carry-in and
borrow-in are ports, and "plus one" cells are built from XNOR/OR.

Port conventions (buses are ``[w-1:0]``):

===========  ==========================================
adder        a, b, cin -> s, cout        (a + b + cin)
subtractor   a, b, bin -> d, bout        (a - b - bin)
multiplier   a, b      -> p[2w-1:0]      (a * b)
comparator   a, b      -> gt, eq, lt
===========  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import AugmentError
from ..netlist.ir import Decl, Instance, ModuleDef, Netlist

ARCHITECTURES = {
    "adder": ("ripple-carry", "carry-lookahead", "carry-select"),
    "subtractor": ("ripple-borrow", "complement-add"),
    "multiplier": ("array", "shift-add-unrolled"),
    "comparator": ("ripple-chain", "tree"),
}

CLA_GROUP = 4


@dataclass(frozen=True)
class DesignSpec:
    class_name: str
    width: int
    arch: str | None = None
    description: str = ""

    def __post_init__(self):
        if not self.class_name:
            raise AugmentError("CONFIG_ERROR", "class name must be non-empty")
        if not 2 <= self.width <= 64:
            raise AugmentError("CONFIG_ERROR", f"width {self.width} outside [2, 64]")

    def to_dict(self) -> dict:
        return {"class": self.class_name, "width": self.width, "arch": self.arch, "description": self.description}


def top_name(spec: DesignSpec) -> str:
    return f"{spec.class_name}_{(spec.arch or 'default').replace('-', '_')}_w{spec.width}"


class ModuleBuilder:
    """Accumulates declarations and instances for one module.

    Internal values live on fresh wires; :meth:`drive` later aliases a wire
    onto an output port bit so no buffer gates are needed.
    """

    def __init__(self, name: str):
        self.name = name
        self.port_names: list[str] = []
        self.decls: list[Decl] = []
        self.instances: list[Instance] = []
        self._wires: list[str] = []
        self._alias: dict[str, str] = {}
        self._counter = 0

    def port(self, kind: str, name: str, width: int | None = None) -> list[str]:
        """Declare a port; returns its bits least significant first."""
        self.port_names.append(name)
        if width is None:
            self.decls.append(Decl(kind, name))
            return [name]
        self.decls.append(Decl(kind, name, width - 1, 0))
        return [f"{name}.{i}" for i in range(width)]

    def wire(self) -> str:
        n = f"n{len(self._wires)}"
        self._wires.append(n)
        return n

    def _inst_name(self, stem: str) -> str:
        self._counter += 1
        return f"{stem}{self._counter}"

    def gate(self, kw: str, *ins: str, out: str | None = None) -> str:
        out = out or self.wire()
        pins = ((None, (out,)),) + tuple((None, (n,)) for n in ins)
        self.instances.append(Instance(self._inst_name("g"), kw, pins))
        return out

    def sub(self, target: str, stem: str, **pins) -> None:
        """Instantiate a module; bus pins are given LSB-first lists."""
        bindings = []
        for port, nets in pins.items():
            nets = [nets] if isinstance(nets, str) else list(nets)
            bindings.append((port, tuple(reversed(nets))))
        self.instances.append(Instance(self._inst_name(stem), target, tuple(bindings)))

    def cell(self, target: str, ins: dict[str, str], outs: list[str]) -> list[str]:
        nets = {p: self.wire() for p in outs}
        self.sub(target, "u", **ins, **nets)
        return [nets[p] for p in outs]

    def drive(self, port_bit: str, net: str) -> None:
        """Make ``port_bit`` carry the value of internal wire ``net``."""
        if net in self._wires and net not in self._alias:
            self._alias[net] = port_bit
        else:
            self.gate("buf", net, out=port_bit)

    def build(self) -> ModuleDef:
        def sub(n: str) -> str:
            return self._alias.get(n, n)

        instances = [
            Instance(i.name, i.target, tuple((p, tuple(sub(n) for n in nets)) for p, nets in i.bindings))
            for i in self.instances
        ]
        decls = list(self.decls) + [Decl("wire", w) for w in self._wires if w not in self._alias]
        return ModuleDef(self.name, tuple(self.port_names), decls, instances)


# ---------------------------------------------------------------------------
# leaf modules


def _fa() -> ModuleDef:
    m = ModuleBuilder("fa")
    a, b, cin = m.port("input", "a")[0], m.port("input", "b")[0], m.port("input", "cin")[0]
    s, cout = m.port("output", "s")[0], m.port("output", "cout")[0]
    x = m.gate("xor", a, b)
    m.gate("xor", x, cin, out=s)
    t1 = m.gate("and", a, b)
    t2 = m.gate("and", x, cin)
    m.gate("or", t1, t2, out=cout)
    return m.build()


def _ha(plus_one: bool = False) -> ModuleDef:
    # plus_one: a + b + 1 -> s = xnor, c = or
    m = ModuleBuilder("ha1" if plus_one else "ha")
    a, b = m.port("input", "a")[0], m.port("input", "b")[0]
    s, c = m.port("output", "s")[0], m.port("output", "c")[0]
    m.gate("xnor" if plus_one else "xor", a, b, out=s)
    m.gate("or" if plus_one else "and", a, b, out=c)
    return m.build()


def _fs() -> ModuleDef:
    m = ModuleBuilder("fs")
    a, b, bin_ = m.port("input", "a")[0], m.port("input", "b")[0], m.port("input", "bin")[0]
    d, bout = m.port("output", "d")[0], m.port("output", "bout")[0]
    m.gate("xor", a, b, bin_, out=d)
    t1 = m.gate("and", m.gate("not", a), b)
    t2 = m.gate("and", m.gate("xnor", a, b), bin_)
    m.gate("or", t1, t2, out=bout)
    return m.build()


def _cla_group(n: int) -> ModuleDef:
    """Lookahead group: internal carries in two-level form, block G/P for carry-out."""
    m = ModuleBuilder(f"cla_g{n}")
    a = m.port("input", "a", n)
    b = m.port("input", "b", n)
    c0 = m.port("input", "c0")[0]
    s = m.port("output", "s", n)
    cout = m.port("output", "cout")[0]
    g = [m.gate("and", a[i], b[i]) for i in range(n)]
    p = [m.gate("xor", a[i], b[i]) for i in range(n)]

    def generate(i: int) -> list[str]:
        # terms of G[i:0]: g_i, p_i g_{i-1}, ..., p_i..p_1 g_0
        terms = [g[i]]
        for j in range(i - 1, -1, -1):
            terms.append(m.gate("and", *p[j + 1 : i + 1], g[j]))
        return terms

    carries = [c0]
    for i in range(n - 1):
        carries.append(m.gate("or", *generate(i), m.gate("and", *p[: i + 1], c0)))
    for i in range(n):
        m.gate("xor", p[i], carries[i], out=s[i])
    terms = generate(n - 1)
    block_g = m.gate("or", *terms) if len(terms) > 1 else terms[0]
    block_p = m.gate("and", *p) if n > 1 else p[0]
    m.gate("or", block_g, m.gate("and", block_p, c0), out=cout)
    return m.build()


def _cmp_leaf() -> ModuleDef:
    m = ModuleBuilder("cmp_bit")
    a, b = m.port("input", "a")[0], m.port("input", "b")[0]
    g, e = m.port("output", "g")[0], m.port("output", "e")[0]
    nb = m.gate("not", b)
    m.gate("and", a, nb, out=g)
    m.gate("xnor", a, b, out=e)
    return m.build()


def _cmp_lsb() -> ModuleDef:
    m = ModuleBuilder("cmp_lsb")
    a, b = m.port("input", "a")[0], m.port("input", "b")[0]
    g, l = m.port("output", "g")[0], m.port("output", "l")[0]
    m.gate("and", a, m.gate("not", b), out=g)
    m.gate("and", m.gate("not", a), b, out=l)
    return m.build()


def _cmp_cell() -> ModuleDef:
    # greater/less chains; this bit decides unless a == b, then defer to lower bits
    m = ModuleBuilder("cmp_cell")
    a, b = m.port("input", "a")[0], m.port("input", "b")[0]
    gin, lin = m.port("input", "gin")[0], m.port("input", "lin")[0]
    gout, lout = m.port("output", "gout")[0], m.port("output", "lout")[0]
    gi = m.gate("and", a, m.gate("not", b))
    li = m.gate("and", m.gate("not", a), b)
    ei = m.gate("xnor", a, b)
    m.gate("or", gi, m.gate("and", ei, gin), out=gout)
    m.gate("or", li, m.gate("and", ei, lin), out=lout)
    return m.build()


def _cmp_merge() -> ModuleDef:
    m = ModuleBuilder("cmp_merge")
    gh, eh = m.port("input", "gh")[0], m.port("input", "eh")[0]
    gl, el = m.port("input", "gl")[0], m.port("input", "el")[0]
    g, e = m.port("output", "g")[0], m.port("output", "e")[0]
    t = m.gate("and", eh, gl)
    m.gate("or", gh, t, out=g)
    m.gate("and", eh, el, out=e)
    return m.build()


# ---------------------------------------------------------------------------
# adders


def _add_bits(m: ModuleBuilder, bits: list[str], stem: str) -> tuple[str, str | None]:
    """Reduce 1-3 equal-weight bits to (sum, carry) with fa/ha cells."""
    if len(bits) == 3:
        s, c = m.cell("fa", {"a": bits[0], "b": bits[1], "cin": bits[2]}, ["s", "cout"])
        return s, c
    if len(bits) == 2:
        s, c = m.cell("ha", {"a": bits[0], "b": bits[1]}, ["s", "c"])
        return s, c
    return bits[0], None


def _ripple(m: ModuleBuilder, a: list[str], b: list[str], cin: str | None, plus_one: bool = False):
    """Ripple chain over equal-length vectors; returns (sums, carry-out).

    With ``cin`` None the first bit uses a half adder (``ha1`` when
    ``plus_one``, i.e. an implicit carry-in of 1).
    """
    sums = []
    carry = cin
    for i in range(len(a)):
        if carry is None:
            s, carry = m.cell("ha1" if plus_one else "ha", {"a": a[i], "b": b[i]}, ["s", "c"])
        else:
            s, carry = m.cell("fa", {"a": a[i], "b": b[i], "cin": carry}, ["s", "cout"])
        sums.append(s)
    return sums, carry


def _adder_ports(m: ModuleBuilder, w: int):
    a = m.port("input", "a", w)
    b = m.port("input", "b", w)
    cin = m.port("input", "cin")[0]
    s = m.port("output", "s", w)
    cout = m.port("output", "cout")[0]
    return a, b, cin, s, cout


def adder_ripple_carry(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    nl.add(_fa())
    m = ModuleBuilder(top_name(spec))
    a, b, cin, s, cout = _adder_ports(m, spec.width)
    sums, carry = _ripple(m, a, b, cin)
    for port_bit, net in zip(s, sums):
        m.drive(port_bit, net)
    m.drive(cout, carry)
    return m.build()


def adder_carry_lookahead(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    m = ModuleBuilder(top_name(spec))
    a, b, cin, s, cout = _adder_ports(m, spec.width)
    carry = cin
    for lo in range(0, spec.width, CLA_GROUP):
        n = min(CLA_GROUP, spec.width - lo)
        if f"cla_g{n}" not in nl:
            nl.add(_cla_group(n))
        outs = [m.wire() for _ in range(n)]
        nxt = m.wire()
        m.sub(f"cla_g{n}", "grp", a=a[lo : lo + n], b=b[lo : lo + n], c0=carry, s=outs, cout=nxt)
        for i, net in enumerate(outs):
            m.drive(s[lo + i], net)
        carry = nxt
    m.drive(cout, carry)
    return m.build()


def adder_carry_select(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    for mod in (_fa(), _ha(), _ha(plus_one=True)):
        nl.add(mod)
    m = ModuleBuilder(top_name(spec))
    w = spec.width
    a, b, cin, s, cout = _adder_ports(m, w)
    low = w // 2  # the upper, duplicated half gets the extra bit for odd widths
    low_sums, sel = _ripple(m, a[:low], b[:low], cin)
    hi0, c0 = _ripple(m, a[low:], b[low:], None)
    hi1, c1 = _ripple(m, a[low:], b[low:], None, plus_one=True)
    for i, net in enumerate(low_sums):
        m.drive(s[i], net)
    for i in range(w - low):
        m.gate("mux", hi0[i], hi1[i], sel, out=s[low + i])
    m.gate("mux", c0, c1, sel, out=cout)
    return m.build()


# ---------------------------------------------------------------------------
# subtractors


def _sub_ports(m: ModuleBuilder, w: int):
    a = m.port("input", "a", w)
    b = m.port("input", "b", w)
    bin_ = m.port("input", "bin")[0]
    d = m.port("output", "d", w)
    bout = m.port("output", "bout")[0]
    return a, b, bin_, d, bout


def subtractor_ripple_borrow(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    nl.add(_fs())
    m = ModuleBuilder(top_name(spec))
    a, b, bin_, d, bout = _sub_ports(m, spec.width)
    borrow = bin_
    for i in range(spec.width):
        diff, borrow = m.cell("fs", {"a": a[i], "b": b[i], "bin": borrow}, ["d", "bout"])
        m.drive(d[i], diff)
    m.drive(bout, borrow)
    return m.build()


def subtractor_complement_add(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    # a - b - bin == a + ~b + ~bin - 2^w ; borrow-out is the inverted carry
    nl.add(_fa())
    m = ModuleBuilder(top_name(spec))
    a, b, bin_, d, bout = _sub_ports(m, spec.width)
    nb = [m.gate("not", x) for x in b]
    cin = m.gate("not", bin_)
    sums, carry = _ripple(m, a, nb, cin)
    for port_bit, net in zip(d, sums):
        m.drive(port_bit, net)
    m.gate("not", carry, out=bout)
    return m.build()


# ---------------------------------------------------------------------------
# multipliers


def _mul_setup(spec: DesignSpec, nl: Netlist):
    nl.add(_fa())
    nl.add(_ha())
    m = ModuleBuilder(top_name(spec))
    w = spec.width
    a = m.port("input", "a", w)
    b = m.port("input", "b", w)
    p = m.port("output", "p", 2 * w)
    pp = [[m.gate("and", a[j], b[i]) for j in range(w)] for i in range(w)]
    return m, p, pp


def multiplier_array(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    """Carry-save array: each row adds into (sum, carry) vectors, then one ripple row."""
    m, p, pp = _mul_setup(spec, nl)
    w = spec.width
    sums: dict[int, str] = {j: pp[0][j] for j in range(w)}
    carries: dict[int, str] = {}
    for i in range(1, w):
        new_carries: dict[int, str] = {}
        for j in range(w):
            k = i + j
            bits = [pp[i][j]] + [v for v in (sums.get(k), carries.pop(k, None)) if v is not None]
            s, c = _add_bits(m, bits, "csa")
            sums[k] = s
            if c is not None:
                new_carries[k + 1] = c
        carries.update(new_carries)
    carry = None
    for k in range(2 * w):
        bits = [v for v in (sums.get(k), carries.get(k), carry) if v is not None]
        s, carry = _add_bits(m, bits, "fin")
        m.drive(p[k], s)
    return m.build()


def multiplier_shift_add(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    """MSB-first unrolled shift-and-add: ``acc = (acc << 1) + (a & b[i])`` for i = w-1 .. 0.

    Each step's carry ripples through the upper accumulator bits.
    """
    m, p, pp = _mul_setup(spec, nl)
    w = spec.width
    acc = list(pp[w - 1])  # acc[k] has weight k (relative to the current step)
    for i in range(w - 2, -1, -1):
        shifted = [None] + acc
        out, carry = [], None
        for k in range(len(shifted)):
            bits = [x for x in (shifted[k], pp[i][k] if k < w else None, carry) if x is not None]
            s, carry = _add_bits(m, bits, "step")
            out.append(s)
        if carry is not None:
            out.append(carry)
        acc = out
    for k in range(2 * w):
        m.drive(p[k], acc[k])
    return m.build()


# ---------------------------------------------------------------------------
# comparators


def _cmp_ports(m: ModuleBuilder, w: int):
    a = m.port("input", "a", w)
    b = m.port("input", "b", w)
    gt = m.port("output", "gt")[0]
    eq = m.port("output", "eq")[0]
    lt = m.port("output", "lt")[0]
    return a, b, gt, eq, lt


def comparator_ripple_chain(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    nl.add(_cmp_lsb())
    nl.add(_cmp_cell())
    m = ModuleBuilder(top_name(spec))
    a, b, gt, eq, lt = _cmp_ports(m, spec.width)
    g, l = m.cell("cmp_lsb", {"a": a[0], "b": b[0]}, ["g", "l"])
    for i in range(1, spec.width):
        g, l = m.cell("cmp_cell", {"a": a[i], "b": b[i], "gin": g, "lin": l}, ["gout", "lout"])
    m.drive(gt, g)
    m.drive(lt, l)
    m.gate("nor", g, l, out=eq)
    return m.build()


def comparator_tree(spec: DesignSpec, nl: Netlist) -> ModuleDef:
    nl.add(_cmp_leaf())
    nl.add(_cmp_merge())
    m = ModuleBuilder(top_name(spec))
    a, b, gt, eq, lt = _cmp_ports(m, spec.width)
    level = [tuple(m.cell("cmp_bit", {"a": a[i], "b": b[i]}, ["g", "e"])) for i in range(spec.width)]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            (gl, el), (gh, eh) = level[i], level[i + 1]
            nxt.append(tuple(m.cell("cmp_merge", {"gh": gh, "eh": eh, "gl": gl, "el": el}, ["g", "e"])))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    g, e = level[0]
    m.drive(gt, g)
    m.drive(eq, e)
    m.gate("nor", g, e, out=lt)
    return m.build()


GENERATORS = {
    ("adder", "ripple-carry"): adder_ripple_carry,
    ("adder", "carry-lookahead"): adder_carry_lookahead,
    ("adder", "carry-select"): adder_carry_select,
    ("subtractor", "ripple-borrow"): subtractor_ripple_borrow,
    ("subtractor", "complement-add"): subtractor_complement_add,
    ("multiplier", "array"): multiplier_array,
    ("multiplier", "shift-add-unrolled"): multiplier_shift_add,
    ("comparator", "ripple-chain"): comparator_ripple_chain,
    ("comparator", "tree"): comparator_tree,
}


@dataclass
class GeneratedDesign:
    spec: DesignSpec
    netlist: Netlist
    top: str
    meta: dict = field(default_factory=dict)


def synth_generate(spec: DesignSpec, seed: int = 0) -> Netlist:
    """Build the requested architecture; the top module is ``top_name(spec)``.

    Output is fully determined by ``spec``; ``seed`` only picks the
    architecture when the design spec leaves it open.
    """
    if spec.class_name not in ARCHITECTURES:
        raise AugmentError("UNSUPPORTED_CLASS", f"no generator for class {spec.class_name!r}")
    arch = spec.arch
    if arch is None:
        options = ARCHITECTURES[spec.class_name]
        arch = options[seed % len(options)]
        spec = DesignSpec(spec.class_name, spec.width, arch, spec.description)
    if (spec.class_name, arch) not in GENERATORS:
        raise AugmentError("UNSUPPORTED_ARCHITECTURE", f"{spec.class_name} has no architecture {arch!r}")
    nl = Netlist()
    top = GENERATORS[(spec.class_name, arch)](spec, nl)
    nl.add(top)
    return nl


def reference_function(class_name: str, width: int):
    """Integer oracle: maps a dict of operand ints to a dict of output ints."""
    mask = (1 << width) - 1

    if class_name == "adder":
        def f(v):
            total = v["a"] + v["b"] + v.get("cin", 0)
            return {"s": total & mask, "cout": total >> width}
    elif class_name == "subtractor":
        def f(v):
            diff = v["a"] - v["b"] - v.get("bin", 0)
            return {"d": diff & mask, "bout": int(diff < 0)}
    elif class_name == "multiplier":
        def f(v):
            return {"p": v["a"] * v["b"]}
    elif class_name == "comparator":
        def f(v):
            return {"gt": int(v["a"] > v["b"]), "eq": int(v["a"] == v["b"]), "lt": int(v["a"] < v["b"])}
    else:
        raise AugmentError("UNSUPPORTED_CLASS", f"no oracle for class {class_name!r}")
    return f
