import itertools

import pytest
from conftest import ALL_ARCHS, bits_of, check_against_integers, int_of

from netlearn.augment import (
    ARCHITECTURES,
    DesignSpec,
    find_top,
    synth_generate,
    top_name,
)
from netlearn.errors import AugmentError
from netlearn.netlist import PRIMITIVES, flatten, lint_netlist, simulate


def gate_count(nl, module=None, memo=None):
    """Primitive count by recursive descent over the hierarchy."""
    memo = {} if memo is None else memo
    module = module or find_top(nl)
    if module not in memo:
        memo[module] = sum(
            1 if i.target in PRIMITIVES else gate_count(nl, i.target, memo) for i in nl.modules[module].instances
        )
    return memo[module]


def test_architecture_table():
    assert ARCHITECTURES == {
        "adder": ("ripple-carry", "carry-lookahead", "carry-select"),
        "subtractor": ("ripple-borrow", "complement-add"),
        "multiplier": ("array", "shift-add-unrolled"),
        "comparator": ("ripple-chain", "tree"),
    }


@pytest.mark.parametrize("cls, arch", ALL_ARCHS)
@pytest.mark.parametrize("width", [2, 3, 4])
def test_exhaustive_at_small_widths(cls, arch, width):
    nl = synth_generate(DesignSpec(cls, width, arch))
    assert lint_netlist(nl, None, find_top(nl)).diagnostics == []
    assert check_against_integers(nl, cls, width, exhaustive=True) == 0


@pytest.mark.parametrize("cls, arch", ALL_ARCHS)
@pytest.mark.parametrize("width", [5, 8, 13, 16])
def test_random_vectors_at_larger_widths(cls, arch, width):
    nl = synth_generate(DesignSpec(cls, width, arch))
    assert lint_netlist(nl, None, find_top(nl)).ok
    assert check_against_integers(nl, cls, width, exhaustive=False, seed=width) == 0


@pytest.mark.parametrize("cls, arch", [("adder", "carry-lookahead"), ("multiplier", "array"), ("comparator", "tree")])
def test_width_64_spot_check(cls, arch):
    nl = synth_generate(DesignSpec(cls, 64, arch))
    assert check_against_integers(nl, cls, 64, exhaustive=False, seed=1) == 0


def test_ripple_adder_width4_is_20_gates():
    nl = synth_generate(DesignSpec("adder", 4, "ripple-carry"))
    assert gate_count(nl) == 20
    assert len(flatten(nl, None, find_top(nl)).gates) == 20


def test_cla_equals_ripple_on_all_inputs():
    rc = synth_generate(DesignSpec("adder", 4, "ripple-carry"))
    cla = synth_generate(DesignSpec("adder", 4, "carry-lookahead"))
    f_rc, f_cla = flatten(rc, None, find_top(rc)), flatten(cla, None, find_top(cla))
    for a, b in itertools.product(range(16), repeat=2):
        ins = {**bits_of("a", 4, a), **bits_of("b", 4, b), "cin": 0}
        assert simulate(f_rc, ins) == simulate(f_cla, ins)
    assert len(f_rc.gates) != len(f_cla.gates)


def test_width2_comparator_chain():
    nl = synth_generate(DesignSpec("comparator", 2, "ripple-chain"))
    fnl = flatten(nl, None, find_top(nl))
    for a, b in itertools.product(range(4), repeat=2):
        out = simulate(fnl, {**bits_of("a", 2, a), **bits_of("b", 2, b)})
        assert out["gt"] == int(a > b)


def test_gate_counts_distinct_across_architectures():
    """Every class/width pair in [2, 64] except 2-bit multipliers, where both forms are minimal."""
    ties = []
    for cls, archs in ARCHITECTURES.items():
        for w in range(2, 65):
            counts = [gate_count(synth_generate(DesignSpec(cls, w, a))) for a in archs]
            if len(set(counts)) < len(counts):
                ties.append((cls, w))
    assert ties == [("multiplier", 2)]


def test_flatten_gate_count_matches_recursive_count():
    for cls, arch in ALL_ARCHS:
        nl = synth_generate(DesignSpec(cls, 6, arch))
        assert len(flatten(nl, None, find_top(nl)).gates) == gate_count(nl)


def test_deterministic_output():
    from netlearn.netlist import write_netlist

    for cls, arch in ALL_ARCHS:
        a = write_netlist(synth_generate(DesignSpec(cls, 5, arch)))
        assert a == write_netlist(synth_generate(DesignSpec(cls, 5, arch)))


def test_top_module_name():
    spec = DesignSpec("adder", 7, "carry-select")
    nl = synth_generate(spec)
    assert find_top(nl) == top_name(spec) == list(nl.modules)[-1]


def test_unpinned_architecture_picked_by_seed():
    tops = {find_top(synth_generate(DesignSpec("adder", 4), seed=s)) for s in range(3)}
    assert len(tops) == 3


@pytest.mark.parametrize(
    "spec, code",
    [
        (lambda: DesignSpec("divider", 4), "UNSUPPORTED_CLASS"),
        (lambda: DesignSpec("adder", 4, "kogge-stone"), "UNSUPPORTED_ARCHITECTURE"),
    ],
)
def test_generator_errors(spec, code):
    with pytest.raises(AugmentError) as exc:
        synth_generate(spec())
    assert exc.value.code == code


@pytest.mark.parametrize("width", [1, 65])
def test_spec_width_bounds(width):
    with pytest.raises(AugmentError):
        DesignSpec("adder", width)


def test_spec_requires_class():
    with pytest.raises(AugmentError):
        DesignSpec("", 4)


def test_carry_in_propagates():
    nl = synth_generate(DesignSpec("adder", 3, "carry-select"))
    fnl = flatten(nl, None, find_top(nl))
    out = simulate(fnl, {**bits_of("a", 3, 7), **bits_of("b", 3, 0), "cin": 1})
    assert int_of(out, "s", 3) == 0 and out["cout"] == 1

