"""End-to-end curation: generate, repair, filter, vote, and emit a labeled dataset."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import AugmentError, ConfigError
from ..graph import CircuitGraph, dump_dataset, to_graph
from ..netlist import CellLibrary, Netlist, flatten, parse_netlist, write_netlist
from .client import (
    Design,
    GeneratorClient,
    RepairExhausted,
    StubClient,
    make_client,
    random_netlist,
    repair_loop,
)
from .compose import find_top
from .filters import CurationRecord, StageOutcome, cell_count_filter, similarity_filter
from .generators import ARCHITECTURES, DesignSpec, synth_generate
from .vote import BATCH_SIZE, WINNERS, architecture_vote

_GLOBAL_KEYS = {
    "count": int,
    "tau": float,
    "rho": float,
    "vote_share": float,
    "vote_batch": int,
    "vote_k": int,
    "seed": int,
    "client": str,
    "temperature": float,
    "max_iters": int,
    "decoys": int,
    "stub.corrupt_prob": float,
    "stub.trivial_prob": float,
    "stub.decoy_prob": float,
    "stub.defect_prob": float,
}
_SPEC_KEYS = {"class": str, "width": int, "arch": str, "description": str, "count": int, "golden": str}


@dataclass
class CurationConfig:
    specs: list[DesignSpec] = field(default_factory=list)
    counts: dict[int, int] = field(default_factory=dict)  # spec index -> override
    goldens: dict[int, str] = field(default_factory=dict)  # spec index -> netlist path
    count: int = 10
    tau: float = 0.9
    rho: float = 0.5
    vote_share: float = 0.5
    vote_batch: int = BATCH_SIZE
    vote_k: int = WINNERS
    seed: int = 0
    client: str = "stub"
    temperature: float = 0.8
    max_iters: int = 5
    decoys: int = 0  # random circuits appended to each spec's pool
    stub: dict = field(default_factory=dict)

    def count_for(self, idx: int) -> int:
        return self.counts.get(idx, self.count)

    def validate(self) -> CurationConfig:
        if not self.specs:
            raise ConfigError("curation config names no specs")
        if not -1 < self.tau <= 1:
            raise ConfigError(f"tau must lie in (-1, 1], got {self.tau}")
        if not 0 < self.rho < 1:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if not 0 <= self.vote_share <= 1:
            raise ConfigError(f"vote_share must lie in [0, 1], got {self.vote_share}")
        if not 1 <= self.vote_k <= self.vote_batch:
            raise ConfigError(f"need 1 <= vote_k <= vote_batch, got {self.vote_k} and {self.vote_batch}")
        if self.count < 1 or any(c < 1 for c in self.counts.values()) or self.max_iters < 1 or self.decoys < 0:
            raise ConfigError("counts and max_iters must be positive, decoys non-negative")
        return self

    def snapshot(self) -> dict:
        out = {k: getattr(self, k) for k in ("count", "tau", "rho", "vote_share", "vote_batch", "vote_k",
                                             "seed", "client", "temperature", "max_iters", "decoys")}
        out["stub"] = dict(sorted(self.stub.items()))
        out["specs"] = [
            {**s.to_dict(), "count": self.count_for(i), "golden": self.goldens.get(i)} for i, s in enumerate(self.specs)
        ]
        return out


def _convert(key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def parse_curation_config(text: str, overrides: dict | None = None) -> CurationConfig:
    """``key=value`` lines; ``#`` starts a comment. ``spec.N.*`` keys describe spec N."""
    cfg = CurationConfig()
    raw_specs: dict[int, dict] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("spec."):
            parts = key.split(".")
            if len(parts) != 3 or not parts[1].isdigit() or parts[2] not in _SPEC_KEYS:
                raise ConfigError(f"line {lineno}: bad spec key {key!r}")
            raw_specs.setdefault(int(parts[1]), {})[parts[2]] = _convert(key, value, _SPEC_KEYS[parts[2]])
        elif key in _GLOBAL_KEYS:
            v = _convert(key, value, _GLOBAL_KEYS[key])
            if key.startswith("stub."):
                cfg.stub[key[5:]] = v
            else:
                setattr(cfg, key, v)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    for key, v in (overrides or {}).items():
        if v is not None:
            setattr(cfg, key, v)
    for pos, idx in enumerate(sorted(raw_specs)):
        fields = raw_specs[idx]
        if "class" not in fields or "width" not in fields:
            raise ConfigError(f"spec.{idx} needs class and width")
        try:
            cfg.specs.append(DesignSpec(fields["class"], fields["width"], fields.get("arch"), fields.get("description", "")))
        except AugmentError as exc:
            raise ConfigError(f"spec.{idx}: {exc.message}") from None
        if "count" in fields:
            cfg.counts[pos] = fields["count"]
        if "golden" in fields:
            cfg.goldens[pos] = fields["golden"]
    return cfg.validate()


@dataclass
class CuratedDesign:
    design_id: str
    spec: DesignSpec
    source: str
    netlist: Netlist
    top: str
    graph: CircuitGraph


@dataclass
class CurationResult:
    class_names: tuple[str, ...]
    designs: list[CuratedDesign]  # kept, by design id
    records: list[CurationRecord]  # every candidate, by design id

    @property
    def graphs(self) -> list[CircuitGraph]:
        return [d.graph for d in self.designs]

    def ledger_text(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def dataset_text(self) -> str:
        return dump_dataset(self.graphs)


@dataclass
class _Candidate:
    design_id: str
    spec_idx: int
    spec: DesignSpec
    source: str
    record: CurationRecord
    netlist: Netlist | None = None
    top: str | None = None
    graph: CircuitGraph | None = None


def _single_class_graph(nl: Netlist, top: str, cls: str, classes, name: str, lib) -> CircuitGraph:
    # the empty prefix matches every gate
    return to_graph(flatten(nl, lib, top, {"": cls}), classes, name)


def _golden(cfg: CurationConfig, idx: int, classes, lib) -> CircuitGraph:
    spec = cfg.specs[idx]
    if idx in cfg.goldens:
        try:
            with open(cfg.goldens[idx], encoding="utf-8") as fh:
                nl = parse_netlist(fh.read(), lib)
        except OSError as exc:
            raise ConfigError(f"cannot read golden netlist {cfg.goldens[idx]}: {exc}") from None
    elif spec.class_name in ARCHITECTURES:
        arch = spec.arch or ARCHITECTURES[spec.class_name][0]
        nl = synth_generate(DesignSpec(spec.class_name, spec.width, arch))
    else:
        raise AugmentError("NO_GOLDEN_REFERENCE", f"no golden design for spec {idx} ({spec.class_name})")
    return _single_class_graph(nl, find_top(nl), spec.class_name, classes, f"golden_{idx}", lib)


def _reference_size(spec: DesignSpec) -> int:
    if spec.class_name not in ARCHITECTURES:
        return 8 * spec.width
    nl = synth_generate(DesignSpec(spec.class_name, spec.width, spec.arch or ARCHITECTURES[spec.class_name][0]))
    return len(flatten(nl, None, find_top(nl)).gates)


def curate(
    cfg: CurationConfig,
    client: GeneratorClient | None = None,
    lib: CellLibrary | None = None,
    jobs: int = 1,
    sources: dict[int, list[str]] | None = None,
) -> CurationResult:
    """Run every candidate through the repair loop, the cell-count filter, then
    either the similarity filter or architecture voting.

    ``sources`` maps a spec index to pre-generated candidate texts, which
    replace the client's ``generate`` call for that spec.
    """
    cfg.validate()
    if client is None:
        client = make_client(cfg.client, cfg.seed, temperature=cfg.temperature, **cfg.stub)
    classes = tuple(sorted({s.class_name for s in cfg.specs}))

    cands: list[_Candidate] = []
    for si, spec in enumerate(cfg.specs):
        if sources is not None and si in sources:
            texts = list(sources[si])
        else:
            texts = client.generate(spec, cfg.count_for(si), cfg.temperature)
        rng = np.random.default_rng([cfg.seed, si, 3])
        for j in range(cfg.decoys):
            # same size as the class reference so only structure can give it away
            n_gates = _reference_size(spec)
            decoy = random_netlist(n_gates, 2 * spec.width, spec.width, rng, name=f"decoy{si}_{j}")
            texts.append(write_netlist(decoy))
        for i, src in enumerate(texts):
            did = f"d{si:03d}_{i:04d}"
            cands.append(_Candidate(did, si, spec, src, CurationRecord(did, spec.to_dict())))

    def repair(c: _Candidate):
        try:
            return repair_loop(c.source, lib, client, cfg.max_iters)
        except RepairExhausted as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        repaired = list(pool.map(repair, cands))

    alive: list[_Candidate] = []
    for c, res in zip(cands, repaired):
        if isinstance(res, RepairExhausted):
            c.record.add(StageOutcome("lint-repair", "discarded", float(res.iterations), res.message))
            continue
        c.record.add(StageOutcome("lint-repair", "kept", float(res.iterations), f"lint-clean after {res.iterations} debug call(s)"))
        c.source, c.netlist, c.top = res.source, res.netlist, res.top
        c.graph = _single_class_graph(c.netlist, c.top, c.spec.class_name, classes, c.design_id, lib)
        alive.append(c)

    counted = cell_count_filter([(c.spec.class_name, c.graph) for c in alive], cfg.rho)
    survivors = []
    for c, outcome in zip(alive, counted.outcomes):
        c.record.add(outcome)
        if outcome.verdict == "kept":
            survivors.append(c)

    for si in range(len(cfg.specs)):
        pool_ = [c for c in survivors if c.spec_idx == si]
        if not pool_:
            continue
        rng = np.random.default_rng([cfg.seed, si, 5])
        perm = rng.permutation(len(pool_))
        n_vote = int(round(cfg.vote_share * len(pool_)))
        voters = sorted((pool_[int(p)] for p in perm[:n_vote]), key=lambda c: c.design_id)
        sim = sorted((pool_[int(p)] for p in perm[n_vote:]), key=lambda c: c.design_id)
        if sim:
            res = similarity_filter(_golden(cfg, si, classes, lib), [c.graph for c in sim], cfg.tau)
            for c, o in zip(sim, res.outcomes):
                c.record.add(o)
        for b in range(0, len(voters), cfg.vote_batch):
            batch = voters[b : b + cfg.vote_batch]
            designs = [Design(c.design_id, c.spec.class_name, c.source, c.graph) for c in batch]
            res = architecture_vote(designs, client, min(cfg.vote_k, len(batch)))
            for c, o in zip(batch, res.outcomes):
                c.record.add(o)

    kept = [
        CuratedDesign(c.design_id, c.spec, c.source, c.netlist, c.top, c.graph) for c in cands if c.record.kept
    ]
    return CurationResult(classes, kept, [c.record for c in cands])


def stub_client_for(cfg: CurationConfig) -> StubClient:
    return StubClient(cfg.seed, temperature=cfg.temperature, **cfg.stub)
