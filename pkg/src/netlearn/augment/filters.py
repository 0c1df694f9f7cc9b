"""Curation ledger records plus the cell-count and similarity filters."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import AugmentError
from ..graph import CircuitGraph
from ..model import cosine_similarity, readout

STAGES = ("lint-repair", "cell-count", "similarity", "vote")


@dataclass(frozen=True)
class StageOutcome:
    stage: str
    verdict: str  # "kept" | "discarded"
    score: float | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"stage": self.stage, "verdict": self.verdict, "score": self.score, "reason": self.reason}


@dataclass
class CurationRecord:
    design_id: str
    spec: dict
    stages: list[StageOutcome] = field(default_factory=list)

    @property
    def discarded(self) -> bool:
        return any(s.verdict == "discarded" for s in self.stages)

    @property
    def kept(self) -> bool:
        return bool(self.stages) and not self.discarded

    def add(self, outcome: StageOutcome) -> None:
        if outcome.stage not in STAGES:
            raise AugmentError("CONFIG_ERROR", f"unknown stage {outcome.stage!r}")
        if self.discarded:
            raise AugmentError("LEDGER_ERROR", f"{self.design_id} was already discarded")
        self.stages.append(outcome)

    def to_dict(self) -> dict:
        return {
            "design_id": self.design_id,
            "spec": self.spec,
            "stages": [s.to_dict() for s in self.stages],
            "kept": self.kept,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class FilterResult:
    """``kept`` preserves input order; ``outcomes`` aligns with the input."""

    kept: list
    outcomes: list[StageOutcome]

    @property
    def kept_indices(self) -> list[int]:
        return [i for i, o in enumerate(self.outcomes) if o.verdict == "kept"]


def _gate_count(x) -> int:
    if isinstance(x, CircuitGraph):
        return x.num_nodes
    if hasattr(x, "gates"):
        return len(x.gates)
    return int(x)


def cell_count_filter(candidates, rho: float = 0.5) -> FilterResult:
    """Drop designs whose gate count is below ``rho`` times their class mean.

    ``candidates`` are ``(class, design)`` pairs where a design is a
    FlatNetlist, a CircuitGraph or a plain gate count. Class means are taken
    once over the incoming pool.
    """
    if not 0 < rho < 1:
        raise AugmentError("CONFIG_ERROR", f"rho must lie in (0, 1), got {rho}")
    counts = [(cls, _gate_count(d)) for cls, d in candidates]
    by_class: dict[str, list[int]] = {}
    for cls, n in counts:
        by_class.setdefault(cls, []).append(n)
    means = {cls: float(np.mean(v)) for cls, v in by_class.items()}
    kept, outcomes = [], []
    for item, (cls, n) in zip(candidates, counts):
        floor = rho * means[cls]
        if n < floor:
            outcomes.append(StageOutcome("cell-count", "discarded", float(n), f"{n} gates < {floor:.4g} ({cls} floor)"))
        else:
            outcomes.append(StageOutcome("cell-count", "kept", float(n), f"{n} gates >= {floor:.4g}"))
            kept.append(item)
    return FilterResult(kept, outcomes)


def embed(g: CircuitGraph) -> np.ndarray:
    """Mean+max readout of the raw node features."""
    if g.num_nodes == 0:
        raise AugmentError("EMPTY_GRAPH", f"graph {g.name} has no nodes")
    return readout(g.features)


def similarity(a: CircuitGraph, b: CircuitGraph) -> float:
    return cosine_similarity(embed(a), embed(b))


def similarity_filter(golden: CircuitGraph, candidates: list[CircuitGraph], tau: float = 0.9) -> FilterResult:
    if not -1 < tau <= 1:
        raise AugmentError("CONFIG_ERROR", f"tau must lie in (-1, 1], got {tau}")
    h_gold = embed(golden)
    kept, outcomes = [], []
    for g in candidates:
        s = cosine_similarity(h_gold, embed(g))
        if s >= tau:
            outcomes.append(StageOutcome("similarity", "kept", s, f"sim {s:.4f} >= {tau}"))
            kept.append(g)
        else:
            outcomes.append(StageOutcome("similarity", "discarded", s, f"sim {s:.4f} < {tau}"))
    return FilterResult(kept, outcomes)
