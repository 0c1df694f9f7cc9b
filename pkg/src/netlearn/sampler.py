"""Random-walk subgraph sampling and inclusion-frequency loss weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SamplerError
from .graph import CircuitGraph


@dataclass(frozen=True)
class SamplerConfig:
    roots: int = 50
    walk_length: int = 4
    seed: int = 0
    norm_rounds: int = 100
    normalize: bool = True

    def __post_init__(self):
        if self.roots < 1 or self.walk_length < 0 or self.norm_rounds < 1:
            raise SamplerError("CONFIG_ERROR", f"invalid sampler config {self}")


@dataclass
class Subgraph:
    nodes: np.ndarray  # sorted unique original ids
    edges: np.ndarray  # (m, 2) original ids, u < v
    weights: np.ndarray  # per node in ``nodes`` order, > 0

    @property
    def size(self) -> int:
        return len(self.nodes)


def induced_edges(g: CircuitGraph, nodes: np.ndarray) -> np.ndarray:
    if g.num_edges == 0 or len(nodes) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    member = np.zeros(g.num_nodes, dtype=bool)
    member[nodes] = True
    keep = member[g.edges[:, 0]] & member[g.edges[:, 1]]
    return g.edges[keep]


def walk_nodes(g: CircuitGraph, roots: int, walk_length: int, rng: np.random.Generator) -> np.ndarray:
    """Union of nodes visited by ``roots`` walks of ``walk_length`` steps."""
    if g.num_nodes == 0:
        raise SamplerError("EMPTY_GRAPH", f"graph {g.name} has no nodes")
    nbrs = g.neighbors
    visited = set()
    for start in rng.integers(0, g.num_nodes, size=roots).tolist():
        v = start
        visited.add(v)
        for _ in range(walk_length):
            nb = nbrs[v]
            if len(nb) == 0:
                break
            v = int(nb[rng.integers(len(nb))])
            visited.add(v)
    return np.array(sorted(visited), dtype=np.int64)


def random_walk_sample(
    g: CircuitGraph, cfg: SamplerConfig, rng: np.random.Generator, node_weights: np.ndarray | None = None
) -> Subgraph:
    nodes = walk_nodes(g, cfg.roots, cfg.walk_length, rng)
    weights = np.ones(len(nodes)) if node_weights is None else np.asarray(node_weights, dtype=np.float64)[nodes]
    return Subgraph(nodes, induced_edges(g, nodes), weights)


def estimate_loss_weights(g: CircuitGraph, cfg: SamplerConfig) -> np.ndarray:
    """``M / max(C_v, 1)`` where ``C_v`` counts the rounds (of M) that include v."""
    rng = np.random.default_rng(cfg.seed)
    counts = np.zeros(g.num_nodes, dtype=np.int64)
    for _ in range(cfg.norm_rounds):
        counts[walk_nodes(g, cfg.roots, cfg.walk_length, rng)] += 1
    return cfg.norm_rounds / np.maximum(counts, 1)
