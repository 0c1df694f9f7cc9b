"""Desk-scale benchmarks built entirely from the built-in generators.

``operator_benchmark`` is the four-class boundary task: a curated stub
corpus is composed into multi-block designs, and the test designs use one
architecture per class that no training design contains.

``cpu_benchmark`` is the filtering ablation: a small ALU-style "cpu" block
sits among distractor blocks, and its training pool is polluted with
random-circuit decoys that the similarity filter is meant to remove.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment.client import random_netlist
from .augment.compose import compose_design, find_top
from .augment.corrupt import corrupt
from .augment.curate import CurationConfig, CurationResult, curate
from .augment.filters import similarity_filter
from .augment.generators import (
    ARCHITECTURES,
    DesignSpec,
    ModuleBuilder,
    _cmp_cell,
    _cmp_lsb,
    _fa,
    _fs,
    synth_generate,
)
from .graph import CircuitGraph, to_graph
from .netlist import Netlist, flatten

OPERATOR_CLASSES = ("adder", "comparator", "multiplier", "subtractor")
HELD_OUT = {
    "adder": "ripple-carry",
    "comparator": "ripple-chain",
    "multiplier": "shift-add-unrolled",
    "subtractor": "complement-add",
}
WIDTHS = (4, 5, 6, 7, 8)


def operator_curation_config(seed: int = 0, count: int = 4) -> CurationConfig:
    """One spec per (class, architecture, width), stub client, default thresholds."""
    specs = [
        DesignSpec(cls, w, arch)
        for cls in OPERATOR_CLASSES
        for arch in ARCHITECTURES[cls]
        for w in WIDTHS
    ]
    return CurationConfig(specs=specs, count=count, seed=seed).validate()


def block_pool(result: CurationResult) -> dict[tuple[str, str], list[Netlist]]:
    pool: dict[tuple[str, str], list[Netlist]] = {}
    for d in result.designs:
        pool.setdefault((d.spec.class_name, d.spec.arch), []).append(d.netlist)
    return pool


def _compose_many(pool, archs_of, n: int, rng: np.random.Generator, prefix: str, classes, glue: float = 0.3):
    graphs = []
    for i in range(n):
        blocks = []
        for cls in rng.permutation(classes).tolist():
            choices = [a for a in archs_of[cls] if pool.get((cls, a))]
            arch = choices[int(rng.integers(len(choices)))]
            designs = pool[(cls, arch)]
            blocks.append((cls, designs[int(rng.integers(len(designs)))]))
        name = f"{prefix}{i:03d}"
        cd = compose_design(blocks, glue, int(rng.integers(2**31)), name=name)
        graphs.append(to_graph(cd.flat, classes, name))
    return graphs


@dataclass
class Benchmark:
    train: list[CircuitGraph]
    test: list[CircuitGraph]
    curation: CurationResult | None = None


def operator_benchmark(seed: int = 0, n_train: int = 30, n_test: int = 10, count: int = 4) -> Benchmark:
    result = curate(operator_curation_config(seed, count))
    pool = block_pool(result)
    seen = {c: [a for a in ARCHITECTURES[c] if a != HELD_OUT[c]] for c in OPERATOR_CLASSES}
    unseen = {c: [HELD_OUT[c]] for c in OPERATOR_CLASSES}
    rng = np.random.default_rng([seed, 41])
    train = _compose_many(pool, seen, n_train, rng, "train", OPERATOR_CLASSES)
    test = _compose_many(pool, unseen, n_test, rng, "test", OPERATOR_CLASSES)
    return Benchmark(train, test, result)


# ---------------------------------------------------------------------------
# cpu boundary ablation

CPU_CLASSES = ("adder", "comparator", "cpu", "multiplier")
DISTRACTORS = {"adder": ("ripple-carry", "carry-lookahead"), "comparator": ("tree",), "multiplier": ("array",)}


def cpu_block(width: int) -> Netlist:
    """Tiny ALU: add and subtract share operands, ``op`` selects the result, plus a magnitude compare."""
    nl = Netlist()
    for mod in (_fa(), _fs(), _cmp_lsb(), _cmp_cell()):
        nl.add(mod)
    m = ModuleBuilder(f"cpu_alu_w{width}")
    a = m.port("input", "a", width)
    b = m.port("input", "b", width)
    op = m.port("input", "op")[0]
    y = m.port("output", "y", width)
    flag = m.port("output", "flag")[0]
    gt = m.port("output", "gt")[0]
    lt = m.port("output", "lt")[0]
    carry = borrow = op  # op doubles as carry-in and borrow-in
    for i in range(width):
        s, carry = m.cell("fa", {"a": a[i], "b": b[i], "cin": carry}, ["s", "cout"])
        d, borrow = m.cell("fs", {"a": a[i], "b": b[i], "bin": borrow}, ["d", "bout"])
        m.gate("mux", s, d, op, out=y[i])
    m.gate("mux", carry, borrow, op, out=flag)
    g, l = m.cell("cmp_lsb", {"a": a[0], "b": b[0]}, ["g", "l"])
    for i in range(1, width):
        g, l = m.cell("cmp_cell", {"a": a[i], "b": b[i], "gin": g, "lin": l}, ["gout", "lout"])
    m.drive(gt, g)
    m.drive(lt, l)
    nl.add(m.build())
    return nl


def _graph(nl: Netlist) -> CircuitGraph:
    return to_graph(flatten(nl, None, find_top(nl)))


@dataclass
class CpuPool:
    variants: list[Netlist]  # corrupted cpu blocks: genuinely cpu-like
    decoys: list[Netlist]  # random circuits mislabeled as cpu
    variant_kept: list[bool]
    decoy_kept: list[bool]

    def raw(self) -> list[Netlist]:
        return self.variants + self.decoys

    def filtered(self) -> list[Netlist]:
        return [v for v, k in zip(self.variants, self.variant_kept) if k] + [
            d for d, k in zip(self.decoys, self.decoy_kept) if k
        ]


def cpu_training_pool(seed: int, n_per_width: int = 4, tau: float = 0.9, widths=(4, 6)) -> CpuPool:
    """Corrupted cpu variants and equal-size random decoys, judged against the golden block."""
    rng = np.random.default_rng([seed, 59])
    pool = CpuPool([], [], [], [])
    for w in widths:
        golden = cpu_block(w)
        size = len(flatten(golden, None, find_top(golden)).gates)
        vs = [corrupt(golden, float(rng.choice([0.05, 0.1])), int(rng.integers(2**31))) for _ in range(n_per_width)]
        ds = [random_netlist(size, 2 * w + 1, w + 3, rng, name=f"decoy_w{w}_{j}") for j in range(n_per_width)]
        res = similarity_filter(_graph(golden), [_graph(x) for x in vs + ds], tau)
        kept = [o.verdict == "kept" for o in res.outcomes]
        pool.variants += vs
        pool.decoys += ds
        pool.variant_kept += kept[:n_per_width]
        pool.decoy_kept += kept[n_per_width:]
    return pool


def cpu_benchmark(seed: int, filtered: bool, n_train: int = 20, n_test: int = 6, tau: float = 0.9) -> Benchmark:
    """Train on compositions drawing cpu blocks from the raw or the filtered pool; test on golden cpu blocks."""
    cpu_pool = cpu_training_pool(seed, tau=tau)
    cpus = cpu_pool.filtered() if filtered else cpu_pool.raw()
    pool: dict[tuple[str, str], list[Netlist]] = {("cpu", "alu"): cpus}
    for cls, archs in DISTRACTORS.items():
        for arch in archs:
            pool[(cls, arch)] = [synth_generate(DesignSpec(cls, w, arch)) for w in (4, 6)]
    archs_of = {"cpu": ["alu"], **{c: list(a) for c, a in DISTRACTORS.items()}}
    rng = np.random.default_rng([seed, 61])
    train = _compose_many(pool, archs_of, n_train, rng, "train", CPU_CLASSES)
    test_pool = {**pool, ("cpu", "alu"): [cpu_block(w) for w in (5, 7)]}
    test = _compose_many(test_pool, archs_of, n_test, np.random.default_rng([seed, 67]), "test", CPU_CLASSES)
    return Benchmark(train, test)
