import itertools

import numpy as np
import pytest
from conftest import ALL_ARCHS, bits_of, hier_eval, int_of, port_widths
from hypothesis import given, settings
from hypothesis import strategies as st

from netlearn.augment import DesignSpec, find_top, synth_generate
from netlearn.errors import NetlistError
from netlearn.netlist import (
    CODES,
    flatten,
    lint_netlist,
    load_cell_library,
    load_label_map,
    parse_netlist,
    simulate,
    write_netlist,
)

# ---------------------------------------------------------------------------
# cell library


def test_library_single_record():
    lib = load_cell_library("AND2 AND 2")
    assert len(lib) == 1
    assert lib["AND2"].function == "AND" and lib["AND2"].arity == 2


@pytest.mark.parametrize(
    "text, code",
    [
        ("NOT1 NOT 2", "BAD_ARITY"),
        ("XOR2 XOR 2\nXOR2 XOR 2", "DUPLICATE_CELL"),
        ("FOO2 MAJ 2", "UNKNOWN_FUNCTION_TAG"),
        ("M3 MUX 2", "BAD_ARITY"),
        ("A1 AND 1", "BAD_ARITY"),
    ],
)
def test_library_errors(text, code):
    with pytest.raises(NetlistError) as exc:
        load_cell_library(text)
    assert exc.value.code == code


def test_library_comments_and_blank_lines():
    lib = load_cell_library("# cells\n\nINV NOT 1  # inverter\nMX MUX 3\nFF DFF 1\n")
    assert sorted(lib.entries) == ["FF", "INV", "MX"]


# ---------------------------------------------------------------------------
# parser


def test_parse_minimal_module(minimal_buf):
    assert list(minimal_buf.modules) == ["t"]
    mod = minimal_buf.modules["t"]
    assert len(mod.instances) == 1
    assert mod.instances[0].bindings == ((None, ("y",)), (None, ("a",)))


def test_parse_bus_bit_selects():
    nl = parse_netlist("module t(a,y); input [1:0] a; output y; and g1 (y, a[0], a[1]); endmodule")
    inst = nl.modules["t"].instances[0]
    assert [nets for _, nets in inst.bindings] == [("y",), ("a.0",), ("a.1",)]
    assert nl.modules["t"].nets == ["a.1", "a.0", "y"]


def test_parse_missing_endmodule_reports_end_of_input():
    text = "module t(a,y);\ninput a;\noutput y;\nbuf g1 (y, a);\n"
    with pytest.raises(NetlistError) as exc:
        parse_netlist(text)
    assert exc.value.code == "SYNTAX_ERROR"
    assert exc.value.line == 5


def test_parse_syntax_error_has_position():
    with pytest.raises(NetlistError) as exc:
        parse_netlist("module t(a,y);\ninput a\noutput y; endmodule")
    assert exc.value.code == "SYNTAX_ERROR"
    assert exc.value.line == 3 and exc.value.column == 1


def test_parse_named_pins_and_comments():
    src = """// header
    module t(a, b, y);  // ports
      input a, b; output y;
      AND2 u1 (.A(a), .B(b), .Y(y));
    endmodule"""
    nl = parse_netlist(src)
    inst = nl.modules["t"].instances[0]
    assert inst.target == "AND2"
    assert dict(inst.bindings) == {"A": ("a",), "B": ("b",), "Y": ("y",)}


def test_parse_keeps_semantic_errors_for_the_linter():
    nl = parse_netlist("module t(a,y); input a; output y; nosuch g1 (.x(a), .y(y)); endmodule")
    assert nl.modules["t"].instances[0].target == "nosuch"


def test_label_map_file():
    assert load_label_map("adder_ adder\n# note\ncmp_ comparator\n") == {"adder_": "adder", "cmp_": "comparator"}
    with pytest.raises(NetlistError):
        load_label_map("only_one_field\n")


# ---------------------------------------------------------------------------
# linter

BASE = """module sub(x, z); input x; output z; not n1 (z, x); endmodule
module t(a, b, y); input a; input b; output y; wire w; and g1 (w, a, b); sub u1 (.x(w), .z(y)); endmodule"""

DEFECTS = {
    "UNRESOLVED_REF": ("sub u1", "FA u1"),
    "UNDECLARED_NET": ("and g1 (w, a, b)", "and g1 (w, a, q)"),
    "UNDRIVEN_NET": ("and g1 (w, a, b)", "and g1 (w, a, v); wire v"),
    "MULTI_DRIVER": ("and g1 (w, a, b);", "and g1 (w, a, b); or g2 (w, a, b);"),
    "FLOATING_PORT": (".x(w), ", ""),
    "COMB_LOOP": ("and g1 (w, a, b)", "and g1 (w, a, y)"),
    "ARITY_MISMATCH": ("not n1 (z, x)", "not n1 (z, x, x)"),
}


def test_clean_base_has_no_diagnostics():
    assert lint_netlist(parse_netlist(BASE), None, "t").diagnostics == []


def test_defect_table_covers_every_code():
    assert set(DEFECTS) == set(CODES)


@pytest.mark.parametrize("code", sorted(DEFECTS))
def test_each_injected_defect_yields_exactly_its_code(code):
    old, new = DEFECTS[code]
    assert old in BASE
    report = lint_netlist(parse_netlist(BASE.replace(old, new)), None, "t")
    assert set(report.codes()) == {code}
    assert not report.ok


def test_undefined_module_reported_once():
    src = "module t(a,b,y); input a; input b; output y; FA u1 (.a(a), .b(b), .s(y)); endmodule"
    report = lint_netlist(parse_netlist(src), None, "t")
    assert report.codes("error") == ["UNRESOLVED_REF"]


def test_inverter_loop():
    src = "module t(i, o); input i; output o; wire a, b; not g1 (a, b); not g2 (b, a); buf g3 (o, i); endmodule"
    assert lint_netlist(parse_netlist(src), None, "t").codes("error") == ["COMB_LOOP"]


def test_dff_breaks_loops():
    src = "module t(i, o); input i; output o; wire q; xor g1 (o, i, q); dff r1 (q, o); endmodule"
    assert lint_netlist(parse_netlist(src), None, "t").ok


def test_unknown_top():
    with pytest.raises(NetlistError) as exc:
        lint_netlist(parse_netlist(BASE), None, "nope")
    assert exc.value.code == "UNKNOWN_TOP"


def test_library_cell_arity_checked():
    lib = load_cell_library("AND2 AND 2")
    src = "module t(a,b,y); input a, b; output y; AND2 u1 (.A(a), .B(b), .C(a), .Y(y)); endmodule"
    assert lint_netlist(parse_netlist(src), lib, "t").codes("error") == ["ARITY_MISMATCH"]


def test_diagnostic_order_is_deterministic():
    src = BASE.replace("sub u1", "FA u1").replace("and g1 (w, a, b)", "and g1 (w, a, q)")
    a = lint_netlist(parse_netlist(src), None, "t").format()
    b = lint_netlist(parse_netlist(src), None, "t").format()
    assert a == b
    assert [d.code for d in lint_netlist(parse_netlist(src), None, "t").diagnostics] == [
        "UNDECLARED_NET",
        "UNRESOLVED_REF",
    ]


# ---------------------------------------------------------------------------
# flatten

THREE_GATE = """module blk(x, y, z); input x, y; output z; wire p, q;
  and g1 (p, x, y); or g2 (q, x, y); xor g3 (z, p, q); endmodule"""


def test_flatten_two_copies():
    src = THREE_GATE + """
    module t(a, b, c, o1, o2); input a, b, c; output o1, o2;
      blk u1 (.x(a), .y(b), .z(o1)); blk u2 (.x(b), .y(c), .z(o2)); endmodule"""
    fnl = flatten(parse_netlist(src), None, "t")
    assert len(fnl.gates) == 6
    assert {g.path for g in fnl.gates} == {("t", "u1"), ("t", "u2")}
    assert "u1.p" in fnl.nets and "u2.p" in fnl.nets


def test_flatten_primitive_top_is_identity(minimal_buf):
    fnl = flatten(minimal_buf, None, "t")
    assert [(g.function, g.inputs, g.output, g.path) for g in fnl.gates] == [("BUF", ("a",), "y", ("t",))]
    assert fnl.primary_inputs == ["a"] and fnl.primary_outputs == ["y"]


def test_flatten_ripple_adder_gate_count():
    nl = synth_generate(DesignSpec("adder", 4, "ripple-carry"))
    top = find_top(nl)
    fa_gates = len(nl.modules["fa"].instances)
    assert fa_gates == 5
    n_fa = sum(1 for i in nl.modules[top].instances if i.target == "fa")
    assert n_fa == 4
    assert len(flatten(nl, None, top).gates) == n_fa * fa_gates == 20


def test_flatten_refuses_lint_errors():
    with pytest.raises(NetlistError) as exc:
        flatten(parse_netlist(BASE.replace("sub u1", "FA u1")), None, "t")
    assert exc.value.code == "LINT_ERRORS_PRESENT"


def test_labels_from_label_map():
    src = THREE_GATE + """
    module t(a, b, c, o1, o2, o3); input a, b, c; output o1, o2, o3;
      blk add_0 (.x(a), .y(b), .z(o1)); blk mul_0 (.x(b), .y(c), .z(o2)); not glue (o3, a); endmodule"""
    fnl = flatten(parse_netlist(src), None, "t", {"add_": "adder", "mul_": "multiplier"})
    assert sorted(fnl.labels) == ["OTHER"] + ["adder"] * 3 + ["multiplier"] * 3


def test_longest_prefix_wins():
    src = THREE_GATE + "\nmodule t(a,b,o); input a, b; output o; blk add_fast_1 (.x(a), .y(b), .z(o)); endmodule"
    fnl = flatten(parse_netlist(src), None, "t", {"add_": "adder", "add_fast_": "fast"})
    assert set(fnl.labels) == {"fast"}


# ---------------------------------------------------------------------------
# simulation


def test_ripple_adder_3_plus_5():
    nl = synth_generate(DesignSpec("adder", 4, "ripple-carry"))
    fnl = flatten(nl, None, find_top(nl))
    out = simulate(fnl, {**bits_of("a", 4, 3), **bits_of("b", 4, 5), "cin": 0})
    assert int_of(out, "s", 4) == 8 and out["cout"] == 0


def test_ripple_adder_exhaustive_against_integers():
    nl = synth_generate(DesignSpec("adder", 4, "ripple-carry"))
    fnl = flatten(nl, None, find_top(nl))
    for a, b in itertools.product(range(16), repeat=2):
        out = simulate(fnl, {**bits_of("a", 4, a), **bits_of("b", 4, b), "cin": 0})
        assert int_of(out, "s", 4) + 16 * out["cout"] == a + b


def test_buf_chain():
    src = "module t(a,y); input a; output y; wire m; buf g1 (m, a); buf g2 (y, m); endmodule"
    fnl = flatten(parse_netlist(src), None, "t")
    assert simulate(fnl, {"a": 1}) == {"y": 1}


@pytest.mark.parametrize("v", [0, 1])
def test_xor_equal_inputs(v):
    fnl = flatten(parse_netlist("module t(a,b,y); input a, b; output y; xor g (y, a, b); endmodule"), None, "t")
    assert simulate(fnl, {"a": v, "b": v}) == {"y": 0}


def test_mux_selects_second_data_input_when_sel_high():
    fnl = flatten(parse_netlist("module t(a,b,s,y); input a, b, s; output y; mux m (y, a, b, s); endmodule"), None, "t")
    for a, b, s in itertools.product((0, 1), repeat=3):
        assert simulate(fnl, {"a": a, "b": b, "s": s})["y"] == (b if s else a)


def test_unassigned_pi():
    fnl = flatten(parse_netlist("module t(a,b,y); input a, b; output y; and g (y, a, b); endmodule"), None, "t")
    with pytest.raises(NetlistError) as exc:
        simulate(fnl, {"a": 1})
    assert exc.value.code == "UNASSIGNED_PI"


def test_cycle_detected_when_lint_skipped():
    src = "module t(i, o); input i; output o; wire a, b; not g1 (a, b); not g2 (b, a); buf g3 (o, i); endmodule"
    fnl = flatten(parse_netlist(src), None, "t", check=False)
    with pytest.raises(NetlistError) as exc:
        simulate(fnl, {"i": 0})
    assert exc.value.code == "CYCLE_DETECTED"


def test_dff_output_read_from_inputs():
    src = "module t(i, o); input i; output o; wire q; xor g1 (o, i, q); dff r1 (q, o); endmodule"
    fnl = flatten(parse_netlist(src), None, "t")
    assert simulate(fnl, {"i": 1}) == {"o": 1}
    assert simulate(fnl, {"i": 1, "q": 1}) == {"o": 0}


# ---------------------------------------------------------------------------
# flatten preserves function (recursive hierarchy oracle)


def _input_bits(nl, top):
    return nl.modules[top].port_bits("input")


@pytest.mark.parametrize("cls, arch", ALL_ARCHS)
@pytest.mark.parametrize("width", [2, 3, 4, 9])
def test_flat_simulation_matches_hierarchy(cls, arch, width):
    nl = synth_generate(DesignSpec(cls, width, arch))
    top = find_top(nl)
    fnl = flatten(nl, None, top)
    pis = _input_bits(nl, top)
    if len(pis) <= 9:
        vectors = itertools.product((0, 1), repeat=len(pis))
    else:
        rng = np.random.default_rng(width)
        vectors = (tuple(rng.integers(0, 2, size=len(pis)).tolist()) for _ in range(64))
    for vec in vectors:
        ins = dict(zip(pis, vec))
        assert simulate(fnl, ins) == hier_eval(nl, top, ins)


# ---------------------------------------------------------------------------
# writer round-trip


def test_round_trip_minimal(minimal_buf):
    assert parse_netlist(write_netlist(minimal_buf)).modules == minimal_buf.modules


def test_round_trip_two_level_hierarchy():
    src = THREE_GATE + """
    module t(a, b, c, o1, o2); input a, b, c; output o1, o2;
      blk u1 (.x(a), .y(b), .z(o1)); blk u2 (.x(b), .y(c), .z(o2)); endmodule"""
    nl = parse_netlist(src)
    assert parse_netlist(write_netlist(nl)).modules == nl.modules


def test_round_trip_carry_lookahead():
    nl = synth_generate(DesignSpec("adder", 8, "carry-lookahead"))
    back = parse_netlist(write_netlist(nl))
    assert back.modules == nl.modules
    assert write_netlist(back) == write_netlist(nl)


@pytest.mark.parametrize("cls, arch", ALL_ARCHS)
def test_round_trip_preserves_function(cls, arch):
    nl = synth_generate(DesignSpec(cls, 3, arch))
    back = parse_netlist(write_netlist(nl))
    top = find_top(nl)
    a, b = flatten(nl, None, top), flatten(back, None, top)
    assert [(g.function, g.inputs, g.output) for g in a.gates] == [(g.function, g.inputs, g.output) for g in b.gates]


def test_bus_declaration_round_trip():
    src = "module t(a, y); input [3:0] a; output [1:0] y; and g1 (y[0], a[0], a[3]); or g2 (y[1], a[1], a[2]); endmodule"
    nl = parse_netlist(src)
    assert parse_netlist(write_netlist(nl)).modules == nl.modules
    assert port_widths(nl, "t") == {"a": 4, "y": 2}


# ---------------------------------------------------------------------------
# properties

GATES = ["and", "or", "nand", "nor", "xor", "xnor"]


@st.composite
def random_modules(draw):
    """Random lint-clean single-module circuits: each gate reads earlier nets only."""
    n_in = draw(st.integers(1, 4))
    n_gates = draw(st.integers(1, 12))
    nets = [f"i{k}" for k in range(n_in)]
    lines = []
    for g in range(n_gates):
        kind = draw(st.sampled_from(GATES + ["not", "buf", "mux"]))
        arity = {"not": 1, "buf": 1, "mux": 3}.get(kind, draw(st.integers(2, 3)))
        ins = [draw(st.sampled_from(nets)) for _ in range(arity)]
        out = f"w{g}"
        lines.append(f"  {kind} g{g} ({out}, {', '.join(ins)});")
        nets.append(out)
    ports = [f"i{k}" for k in range(n_in)] + ["o"]
    lines.append(f"  buf gout (o, w{n_gates - 1});")
    body = "\n".join(lines)
    wires = ", ".join(f"w{g}" for g in range(n_gates))
    return (
        f"module r({', '.join(ports)});\n  input {', '.join(ports[:-1])};\n  output o;\n  wire {wires};\n{body}\nendmodule\n"
    )


@settings(max_examples=60, deadline=None)
@given(random_modules())
def test_property_round_trip_and_function(src):
    nl = parse_netlist(src)
    assert lint_netlist(nl, None, "r").codes("error") == []
    text = write_netlist(nl)
    again = parse_netlist(text)
    assert again.modules == nl.modules
    assert write_netlist(again) == text
    fnl = flatten(nl, None, "r")
    pis = nl.modules["r"].port_bits("input")
    for vec in itertools.product((0, 1), repeat=len(pis)):
        ins = dict(zip(pis, vec))
        assert simulate(fnl, ins) == hier_eval(nl, "r", ins)


@settings(max_examples=30, deadline=None)
@given(random_modules())
def test_property_lint_is_deterministic(src):
    nl = parse_netlist(src)
    assert lint_netlist(nl, None, "r") == lint_netlist(parse_netlist(src), None, "r")
