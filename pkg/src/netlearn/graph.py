"""Flat netlist -> undirected gate graph with per-node features.

Feature layout (15 columns)::

    [0]  reads a primary input        (0/1)
    [1]  drives a primary output      (0/1)
    [2]  in-degree                    (distinct driving gates or PIs)
    [3]  out-degree                   (distinct reading gates, +1 if a PO)
    [4:15] one-hot gate function over FUNCTIONS
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GraphError
from .netlist.ir import FlatNetlist
from .netlist.library import FUNCTIONS

FEATURE_DIM = 4 + len(FUNCTIONS)
ONEHOT_OFFSET = 4
FUNCTION_INDEX = {f: i for i, f in enumerate(FUNCTIONS)}


@dataclass(frozen=True, eq=False)
class CircuitGraph:
    name: str
    functions: tuple[str, ...]
    edges: np.ndarray  # (m, 2) int64, u < v, lexicographically sorted
    labels: np.ndarray  # (n,) int64
    class_names: tuple[str, ...]
    pi_flags: np.ndarray  # (n,) int8
    po_flags: np.ndarray
    in_degree: np.ndarray  # (n,) int64, directed, before symmetrization
    out_degree: np.ndarray
    features: np.ndarray = field(repr=False)  # (n, FEATURE_DIM) float64

    @property
    def num_nodes(self) -> int:
        return len(self.functions)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        """Sorted neighbor arrays per node."""
        n = self.num_nodes
        if self.num_edges == 0:
            return [np.zeros(0, dtype=np.int64) for _ in range(n)]
        both = np.concatenate([self.edges, self.edges[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        splits = np.searchsorted(both[:, 0], np.arange(1, n))
        return np.split(both[:, 1], splits)

    @cached_property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(map(tuple, self.edges.tolist()))

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self.edge_set

    @property
    def graph_label(self) -> int:
        """Most frequent node label (ties to the lower class id)."""
        if self.num_nodes == 0:
            raise GraphError("EMPTY_GRAPH", f"graph {self.name} has no nodes")
        counts = np.bincount(self.labels, minlength=self.num_classes)
        return int(np.argmax(counts))

    def permuted(self, perm: np.ndarray) -> CircuitGraph:
        """Relabel nodes: new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        edges = inv[self.edges] if self.num_edges else self.edges
        return make_graph(
            self.name,
            [self.functions[i] for i in perm],
            edges,
            self.labels[perm],
            self.class_names,
            self.pi_flags[perm],
            self.po_flags[perm],
            self.in_degree[perm],
            self.out_degree[perm],
        )

    def same_as(self, other: CircuitGraph) -> bool:
        return (
            self.name == other.name
            and self.functions == other.functions
            and self.class_names == other.class_names
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features)
        )


def _normalize_edges(edges, n: int) -> np.ndarray:
    pairs = set()
    for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2).tolist():
        if u == v:
            continue
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError("BAD_EDGE", f"edge ({u}, {v}) out of range for {n} nodes")
        pairs.add((min(u, v), max(u, v)))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.array(sorted(pairs), dtype=np.int64)


def feature_rows(functions, pi_flags, po_flags, in_degree, out_degree) -> np.ndarray:
    n = len(functions)
    x = np.zeros((n, FEATURE_DIM), dtype=np.float64)
    if n == 0:
        return x
    x[:, 0] = pi_flags
    x[:, 1] = po_flags
    x[:, 2] = in_degree
    x[:, 3] = out_degree
    idx = np.array([FUNCTION_INDEX[f] for f in functions], dtype=np.int64)
    x[np.arange(n), ONEHOT_OFFSET + idx] = 1.0
    return x


def make_graph(name, functions, edges, labels, class_names, pi_flags, po_flags, in_degree, out_degree) -> CircuitGraph:
    functions = tuple(functions)
    n = len(functions)
    for f in functions:
        if f not in FUNCTION_INDEX:
            raise GraphError("BAD_FUNCTION", f"unknown function tag {f!r}")
    labels = np.asarray(labels, dtype=np.int64).reshape(n)
    if n and (labels.min() < 0 or labels.max() >= len(class_names)):
        raise GraphError("BAD_LABEL", f"labels must lie in [0, {len(class_names)})")
    pi = np.asarray(pi_flags, dtype=np.int8).reshape(n)
    po = np.asarray(po_flags, dtype=np.int8).reshape(n)
    ind = np.asarray(in_degree, dtype=np.int64).reshape(n)
    outd = np.asarray(out_degree, dtype=np.int64).reshape(n)
    return CircuitGraph(
        name=name,
        functions=functions,
        edges=_normalize_edges(edges, n),
        labels=labels,
        class_names=tuple(class_names),
        pi_flags=pi,
        po_flags=po,
        in_degree=ind,
        out_degree=outd,
        features=feature_rows(functions, pi, po, ind, outd),
    )


def to_graph(fnl: FlatNetlist, class_names=None, name: str | None = None) -> CircuitGraph:
    """One node per gate; an edge wherever a net connects a driver to a reader.

    ``class_names`` fixes the label vocabulary (needed when several graphs
    share one model); by default it is the sorted set of labels present.
    """
    if class_names is None:
        class_names = sorted(set(fnl.labels))
    class_index = {c: i for i, c in enumerate(class_names)}
    missing = {g.label for g in fnl.gates} - set(class_index)
    if missing:
        raise GraphError("UNKNOWN_CLASS", f"labels {sorted(missing)} not in class list")
    pis = set(fnl.primary_inputs)
    pos = set(fnl.primary_outputs)
    driver = {g.output: g.gid for g in fnl.gates}
    readers = fnl.readers()
    n = len(fnl.gates)
    in_deg = np.zeros(n, dtype=np.int64)
    out_deg = np.zeros(n, dtype=np.int64)
    pi_flag = np.zeros(n, dtype=np.int8)
    po_flag = np.zeros(n, dtype=np.int8)
    edges = set()
    for g in fnl.gates:
        sources = set()
        for net in g.inputs:
            if net in pis:
                pi_flag[g.gid] = 1
                sources.add(("pi", net))
            d = driver.get(net)
            if d is not None and d != g.gid:
                sources.add(("gate", d))
                edges.add((min(d, g.gid), max(d, g.gid)))
        in_deg[g.gid] = len(sources)
        sinks = {r for r in readers.get(g.output, ()) if r != g.gid}
        out_deg[g.gid] = len(sinks) + (1 if g.output in pos else 0)
        if g.output in pos:
            po_flag[g.gid] = 1
    labels = [class_index[g.label] for g in fnl.gates]
    return make_graph(
        name or fnl.name,
        [g.function for g in fnl.gates],
        sorted(edges) if edges else np.zeros((0, 2)),
        labels,
        class_names,
        pi_flag,
        po_flag,
        in_deg,
        out_deg,
    )


def extract_features(g: CircuitGraph) -> np.ndarray:
    """Re-derive the feature matrix from the graph's stored attributes."""
    return feature_rows(g.functions, g.pi_flags, g.po_flags, g.in_degree, g.out_degree)


def with_classes(g: CircuitGraph, class_names) -> CircuitGraph:
    """Re-index labels into a (super)set class vocabulary."""
    index = {c: i for i, c in enumerate(class_names)}
    try:
        labels = [index[g.class_names[i]] for i in g.labels]
    except KeyError as e:
        raise GraphError("UNKNOWN_CLASS", f"class {e.args[0]} missing from vocabulary") from None
    return make_graph(g.name, g.functions, g.edges, labels, class_names, g.pi_flags, g.po_flags, g.in_degree, g.out_degree)


def random_graph(n: int, m: int, rng: np.random.Generator, name: str = "random", class_names=("OTHER",)) -> CircuitGraph:
    """Uniform random graph with uniformly drawn node attributes.

    Degrees are taken from the sampled undirected edges with a random
    orientation per edge, functions and PI/PO flags are drawn uniformly.
    """
    pairs = set()
    max_pairs = n * (n - 1) // 2
    m = min(m, max_pairs)
    while len(pairs) < m:
        u, v = rng.integers(0, n, size=2).tolist()
        if u != v:
            pairs.add((min(u, v), max(u, v)))
    edges = sorted(pairs)
    functions = [FUNCTIONS[i] for i in rng.integers(0, len(FUNCTIONS), size=n)]
    return _from_undirected(name, functions, edges, rng, class_names)


def _from_undirected(name, functions, edges, rng, class_names, pi=None, po=None) -> CircuitGraph:
    n = len(functions)
    in_deg = np.zeros(n, dtype=np.int64)
    out_deg = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        if rng.random() < 0.5:
            u, v = v, u
        out_deg[u] += 1
        in_deg[v] += 1
    if pi is None:
        pi = rng.integers(0, 2, size=n)
    if po is None:
        po = rng.integers(0, 2, size=n)
    return make_graph(name, functions, edges or np.zeros((0, 2)), np.zeros(n, dtype=np.int64), class_names, pi, po, in_deg, out_deg)


def rewired_decoy(g: CircuitGraph, rng: np.random.Generator, swaps_per_edge: int = 10, name: str | None = None) -> CircuitGraph:
    """Degree-sequence-preserving random rewiring of ``g`` used as a negative control.

    Performs ``swaps_per_edge * |E|`` double-edge swap attempts
    ((a,b),(c,d)) -> ((a,d),(c,b)), rejecting swaps that would create a
    self-loop or a duplicate edge. Node attributes are then re-derived for a
    random circuit on the rewired skeleton: each edge gets a random driver
    direction (giving new in/out degrees), gate functions are drawn uniformly
    from the vocabulary, and PI/PO flags are kept per node.
    """
    edges = [tuple(e) for e in g.edges.tolist()]
    present = set(edges)
    m = len(edges)
    if m >= 2:
        for _ in range(swaps_per_edge * m):
            i, j = rng.integers(0, m, size=2).tolist()
            if i == j:
                continue
            a, b = edges[i]
            c, d = edges[j]
            if rng.random() < 0.5:
                c, d = d, c
            if len({a, b, c, d}) < 4:
                continue
            e1 = (min(a, d), max(a, d))
            e2 = (min(c, b), max(c, b))
            if e1 in present or e2 in present:
                continue
            present.discard(edges[i])
            present.discard(edges[j])
            present.add(e1)
            present.add(e2)
            edges[i], edges[j] = e1, e2
    functions = [FUNCTIONS[i] for i in rng.integers(0, len(FUNCTIONS), size=g.num_nodes)]
    return _from_undirected(
        name or f"{g.name}_decoy", functions, sorted(present), rng, g.class_names, g.pi_flags, g.po_flags
    )


# ---------------------------------------------------------------------------
# dataset files


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def dump_dataset(graphs) -> str:
    lines = []
    for g in graphs:
        if not g.name or any(c.isspace() for c in g.name):
            raise GraphError("FORMAT_ERROR", f"graph name {g.name!r} must be non-empty without whitespace")
        lines.append(f"GRAPH {g.name} {g.num_nodes} {g.num_edges} {g.num_classes}")
        lines.append("CLASSES" + "".join(" " + c for c in g.class_names))
        for v in range(g.num_nodes):
            row = " ".join(_fmt(x) for x in g.features[v])
            lines.append(f"NODE {v} {int(g.labels[v])} {row}")
        for u, v in g.edges.tolist():
            lines.append(f"EDGE {u} {v}")
    return "".join(line + "\n" for line in lines)


def save_dataset(graphs, path) -> None:
    text = dump_dataset(graphs)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise GraphError("IO_ERROR", f"cannot write {path}: {e}") from None


def _graph_from_rows(name, class_names, rows, edges, lineno) -> CircuitGraph:
    n = len(rows)
    x = np.array([r[1] for r in rows], dtype=np.float64).reshape(n, FEATURE_DIM)
    labels = [r[0] for r in rows]
    functions = []
    for v in range(n):
        hot = np.flatnonzero(x[v, ONEHOT_OFFSET:] == 1.0)
        if len(hot) != 1 or np.count_nonzero(x[v, ONEHOT_OFFSET:]) != 1:
            raise GraphError("FORMAT_ERROR", f"node {v} of {name}: function block is not one-hot", line=rows[v][2])
        functions.append(FUNCTIONS[hot[0]])
    try:
        return make_graph(name, functions, edges, labels, class_names, x[:, 0], x[:, 1], x[:, 2], x[:, 3])
    except GraphError as e:
        raise GraphError("FORMAT_ERROR", f"graph {name}: {e.message}", line=lineno) from None


def parse_dataset(text: str) -> list[CircuitGraph]:
    graphs: list[CircuitGraph] = []
    lines = text.splitlines()
    i = 0

    def fail(msg: str, lineno: int):
        return GraphError("FORMAT_ERROR", msg, line=lineno)

    while i < len(lines):
        lineno = i + 1
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] != "GRAPH" or len(parts) != 5:
            raise fail(f"expected 'GRAPH name |V| |E| num_classes', got {lines[i]!r}", lineno)
        name = parts[1]
        try:
            n, m, c = (int(p) for p in parts[2:])
        except ValueError:
            raise fail("non-integer count in GRAPH header", lineno) from None
        i += 1
        if i >= len(lines) or not lines[i].startswith("CLASSES"):
            raise fail("expected CLASSES line", i + 1)
        class_names = lines[i].split()[1:]
        if len(class_names) != c:
            raise fail(f"CLASSES lists {len(class_names)} names, header says {c}", i + 1)
        i += 1
        rows = []
        for v in range(n):
            if i >= len(lines):
                raise fail("unexpected end of file in NODE rows", i + 1)
            p = lines[i].split()
            if len(p) != 3 + FEATURE_DIM or p[0] != "NODE":
                raise fail(f"expected NODE row with {FEATURE_DIM} features", i + 1)
            try:
                if int(p[1]) != v:
                    raise fail(f"expected node id {v}", i + 1)
                rows.append((int(p[2]), [float(t) for t in p[3:]], i + 1))
            except ValueError:
                raise fail("malformed number in NODE row", i + 1) from None
            if not 0 <= rows[-1][0] < c:
                raise fail(f"label {rows[-1][0]} outside the {c} classes", i + 1)
            i += 1
        edges = []
        for _ in range(m):
            if i >= len(lines):
                raise fail("unexpected end of file in EDGE rows", i + 1)
            p = lines[i].split()
            if len(p) != 3 or p[0] != "EDGE":
                raise fail("expected 'EDGE u v'", i + 1)
            try:
                u, v = int(p[1]), int(p[2])
            except ValueError:
                raise fail("malformed EDGE row", i + 1) from None
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise fail(f"edge ({u}, {v}) is a self-loop or names a missing node", i + 1)
            edges.append((u, v))
            i += 1
        g = _graph_from_rows(name, class_names, rows, edges or np.zeros((0, 2)), lineno)
        if g.num_edges != m:
            raise fail(f"graph {name} lists duplicate or self-loop edges", lineno)
        graphs.append(g)
    return graphs


def load_dataset(path) -> list[CircuitGraph]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise GraphError("IO_ERROR", f"cannot read {path}: {e}") from None
    return parse_dataset(text)


def dataset_checksum(graphs) -> str:
    return hashlib.sha256(dump_dataset(graphs).encode()).hexdigest()


def class_vocabulary(graphs) -> list[str]:
    """Union of class names across graphs, in first-seen order."""
    seen: dict[str, None] = {}
    for g in graphs:
        for c in g.class_names:
            seen.setdefault(c, None)
    return list(seen)


def label_counts(g: CircuitGraph) -> Counter:
    return Counter(g.class_names[i] for i in g.labels.tolist())


__all__ = [
    "FEATURE_DIM",
    "CircuitGraph",
    "class_vocabulary",
    "dataset_checksum",
    "dump_dataset",
    "extract_features",
    "label_counts",
    "load_dataset",
    "make_graph",
    "parse_dataset",
    "random_graph",
    "rewired_decoy",
    "save_dataset",
    "to_graph",
    "with_classes",
]
