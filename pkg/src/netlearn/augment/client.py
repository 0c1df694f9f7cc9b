"""Generator clients (built-in stub, subprocess, HTTP) and the lint repair loop."""

from __future__ import annotations

import difflib
import json
import os
import re
import shlex
import subprocess
import urllib.error
import urllib.request
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import AugmentError, NetlearnError
from ..graph import CircuitGraph, to_graph
from ..model import cosine_similarity
from ..netlist import (
    CellLibrary,
    Diagnostic,
    LintReport,
    Netlist,
    flatten,
    lint_netlist,
    parse_netlist,
    write_netlist,
)
from .compose import find_top
from .corrupt import corrupt
from .filters import embed
from .generators import ARCHITECTURES, DesignSpec, synth_generate

CLIENT_ENV = "NETLEARN_CLIENT"
DEFAULT_TEMPERATURE = 0.8


@dataclass
class Design:
    """A candidate as seen by an evaluator."""

    design_id: str
    class_name: str
    source: str
    graph: CircuitGraph | None = field(default=None, compare=False)

    def to_wire(self) -> dict:
        return {"id": self.design_id, "class": self.class_name, "source": self.source}


def design_graph(d: Design, lib: CellLibrary | None = None) -> CircuitGraph:
    if d.graph is None:
        nl = parse_netlist(d.source, lib)
        d.graph = to_graph(flatten(nl, lib, find_top(nl)), name=d.design_id)
    return d.graph


def stub_scores(graphs: list[CircuitGraph]) -> list[float]:
    """0.7 * mean pairwise (1 - cosine) to the rest of the batch + 0.3 * size / max size."""
    hs = [embed(g) for g in graphs]
    n = len(hs)
    biggest = max(g.num_nodes for g in graphs)
    scores = []
    for i in range(n):
        others = [1.0 - cosine_similarity(hs[i], hs[j]) for j in range(n) if j != i]
        diversity = float(np.mean(others)) if others else 0.0
        scores.append(round(0.7 * diversity + 0.3 * graphs[i].num_nodes / biggest, 12))
    return scores


class GeneratorClient:
    temperature: float = DEFAULT_TEMPERATURE

    def generate(self, spec: DesignSpec, n: int, temperature: float | None = None) -> list[str]:
        raise NotImplementedError

    def evaluate(self, designs: list[Design]) -> list[float]:
        raise NotImplementedError

    def debug(self, source: str, report: LintReport) -> str:
        raise NotImplementedError


def _spec_key(spec: DesignSpec) -> int:
    return zlib.crc32(f"{spec.class_name}|{spec.width}|{spec.arch}".encode())


_TARGET_RE = re.compile(r"references undefined cell or module '([^']+)'")


class StubClient(GeneratorClient):
    """Deterministic stand-in for a language-model generator.

    Candidate ``i`` of a spec cycles through the class's architectures
    (unless the design spec pins one) and is then perturbed: with probability
    ``corrupt_prob`` some gate functions are swapped, with ``trivial_prob``
    the design is a far narrower build of the same class, with
    ``decoy_prob`` it is a structurally unrelated random circuit, and with
    ``defect_prob`` one or two submodule references get a typo that
    :meth:`debug` can repair. Higher temperature scales every probability.
    """

    def __init__(
        self,
        seed: int = 0,
        *,
        corrupt_prob: float = 0.3,
        trivial_prob: float = 0.1,
        decoy_prob: float = 0.0,
        defect_prob: float = 0.2,
        temperature: float = DEFAULT_TEMPERATURE,
        fix_per_call: int = 1,
    ):
        self.seed = seed
        self.corrupt_prob = corrupt_prob
        self.trivial_prob = trivial_prob
        self.decoy_prob = decoy_prob
        self.defect_prob = defect_prob
        self.temperature = temperature
        self.fix_per_call = fix_per_call
        self.calls = {"generate": 0, "evaluate": 0, "debug": 0}

    def _candidate(self, spec: DesignSpec, i: int, temperature: float) -> str:
        rng = np.random.default_rng([self.seed, _spec_key(spec), i])
        scale = temperature / DEFAULT_TEMPERATURE
        archs = ARCHITECTURES.get(spec.class_name)
        if archs is None:
            raise AugmentError("UNSUPPORTED_CLASS", f"stub cannot generate {spec.class_name!r}")
        arch = spec.arch or archs[i % len(archs)]
        roll = rng.random()
        if roll < self.decoy_prob * scale:
            ref = synth_generate(DesignSpec(spec.class_name, spec.width, arch))
            n_gates = len(flatten(ref, None, find_top(ref)).gates)
            nl = random_netlist(n_gates, 2 * spec.width, spec.width, rng, name=f"decoy_{spec.class_name}_{i}")
        elif roll < (self.decoy_prob + self.trivial_prob) * scale and spec.width > 2:
            nl = synth_generate(DesignSpec(spec.class_name, 2, arch))
        else:
            nl = synth_generate(DesignSpec(spec.class_name, spec.width, arch))
            if rng.random() < self.corrupt_prob * scale:
                rate = float(rng.choice([0.05, 0.1, 0.2]))
                nl = corrupt(nl, rate, int(rng.integers(2**31)))
        if rng.random() < self.defect_prob * scale:
            nl = inject_typos(nl, int(rng.integers(1, 3)), rng)
        return write_netlist(nl)

    def generate(self, spec: DesignSpec, n: int, temperature: float | None = None) -> list[str]:
        self.calls["generate"] += 1
        t = self.temperature if temperature is None else temperature
        return [self._candidate(spec, i, t) for i in range(n)]

    def evaluate(self, designs: list[Design]) -> list[float]:
        self.calls["evaluate"] += 1
        try:
            return stub_scores([design_graph(d) for d in designs])
        except NetlearnError as exc:
            raise AugmentError("EVALUATOR_FAILURE", str(exc)) from exc

    def debug(self, source: str, report: LintReport) -> str:
        """Fix up to ``fix_per_call`` unresolved module references by closest name."""
        self.calls["debug"] += 1
        try:
            nl = parse_netlist(source)
        except NetlearnError:
            return source
        fixed = 0
        for diag in report.errors:
            if fixed >= self.fix_per_call:
                break
            m = _TARGET_RE.search(diag.message)
            if diag.code != "UNRESOLVED_REF" or not m:
                continue
            bad = m.group(1)
            match = difflib.get_close_matches(bad, list(nl.modules), n=1, cutoff=0.6)
            if not match:
                continue
            for mod in nl.modules.values():
                for k, inst in enumerate(mod.instances):
                    if inst.target == bad:
                        mod.instances[k] = type(inst)(inst.name, match[0], inst.bindings, inst.line, inst.column)
            fixed += 1
        return write_netlist(nl) if fixed else source


class BrokenDebugClient(StubClient):
    """Debug never changes anything; useful to exercise exhaustion."""

    def debug(self, source: str, report: LintReport) -> str:
        self.calls["debug"] += 1
        return source


def inject_typos(nl: Netlist, count: int, rng: np.random.Generator) -> Netlist:
    """Misspell the target of ``count`` distinct submodule instantiations."""
    sites = [
        (mname, k)
        for mname, mod in nl.modules.items()
        for k, inst in enumerate(mod.instances)
        if inst.target in nl.modules
    ]
    if not sites:
        return nl
    out = Netlist()
    for name, mod in nl.modules.items():
        out.add(type(mod)(mod.name, mod.port_names, list(mod.decls), list(mod.instances)))
    picks = rng.choice(len(sites), size=min(count, len(sites)), replace=False)
    for j, p in enumerate(sorted(int(x) for x in picks)):
        mname, k = sites[p]
        inst = out.modules[mname].instances[k]
        # distinct misspellings so each one is a separate defect
        out.modules[mname].instances[k] = type(inst)(inst.name, inst.target + "x" * (j + 1), inst.bindings)
    return out


def random_netlist(n_gates: int, n_inputs: int, n_outputs: int, rng: np.random.Generator, name: str = "decoy") -> Netlist:
    """A random acyclic gate network; each gate reads earlier nets uniformly."""
    from ..netlist.ir import Decl, Instance, ModuleDef

    kinds = ("and", "or", "nand", "nor", "xor", "xnor", "not", "buf", "mux")
    arity = {"not": 1, "buf": 1, "mux": 3}
    pis = [f"i{k}" for k in range(n_inputs)]
    nets = list(pis)
    instances, wires = [], []
    for k in range(max(n_gates, 1)):
        kw = kinds[int(rng.integers(len(kinds)))]
        ins = [nets[int(rng.integers(len(nets)))] for _ in range(arity.get(kw, 2))]
        out = f"n{k}"
        wires.append(out)
        nets.append(out)
        instances.append(Instance(f"g{k}", kw, ((None, (out,)), *((None, (x,)) for x in ins))))
    n_outputs = min(max(n_outputs, 1), len(wires))
    outs = wires[-n_outputs:]
    decls = [Decl("input", p) for p in pis] + [Decl("output", o) for o in outs]
    decls += [Decl("wire", w) for w in wires[:-n_outputs]]
    nl = Netlist()
    nl.add(ModuleDef(name, tuple(pis + outs), decls, instances))
    return nl


class _JsonClient(GeneratorClient):
    def __init__(self, temperature: float = DEFAULT_TEMPERATURE, timeout: float = 60.0):
        self.temperature = temperature
        self.timeout = timeout

    def _request(self, payload: dict) -> dict:
        raise NotImplementedError

    def _call(self, payload: dict, key: str):
        try:
            reply = self._request(payload)
        except (OSError, subprocess.SubprocessError, urllib.error.URLError, ValueError) as exc:
            raise AugmentError("EVALUATOR_FAILURE", f"client {payload['op']} failed: {exc}") from exc
        if not isinstance(reply, dict) or key not in reply:
            raise AugmentError("EVALUATOR_FAILURE", f"client reply to {payload['op']} lacks {key!r}")
        return reply[key]

    def generate(self, spec, n, temperature=None):
        t = self.temperature if temperature is None else temperature
        sources = self._call({"op": "generate", "spec": spec.to_dict(), "n": n, "temperature": t}, "sources")
        return [str(s) for s in sources]

    def evaluate(self, designs):
        scores = self._call({"op": "evaluate", "designs": [d.to_wire() for d in designs]}, "scores")
        if len(scores) != len(designs):
            raise AugmentError("EVALUATOR_FAILURE", f"expected {len(designs)} scores, got {len(scores)}")
        return [float(s) for s in scores]

    def debug(self, source, report):
        return str(
            self._call({"op": "debug", "designs": [{"source": source}], "diagnostics": report.to_dict()["diagnostics"]}, "source")
        )


class CommandClient(_JsonClient):
    """One JSON request on stdin, one JSON reply on stdout, per call."""

    def __init__(self, command: str, **kw):
        super().__init__(**kw)
        self.argv = shlex.split(command)

    def _request(self, payload):
        proc = subprocess.run(
            self.argv, input=json.dumps(payload), capture_output=True, text=True, timeout=self.timeout, check=True
        )
        return json.loads(proc.stdout)


class HttpClient(_JsonClient):
    def __init__(self, url: str, **kw):
        super().__init__(**kw)
        self.url = url

    def _request(self, payload):
        req = urllib.request.Request(
            self.url, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"}, method="POST"
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))


def make_client(selector: str | None = "stub", seed: int = 0, **stub_kw) -> GeneratorClient:
    """``stub``, ``cmd:<command line>`` or ``http:<url>``; the environment variable wins."""
    selector = os.environ.get(CLIENT_ENV) or selector or "stub"
    if selector == "stub":
        return StubClient(seed, **stub_kw)
    temperature = stub_kw.get("temperature", DEFAULT_TEMPERATURE)
    if selector.startswith("cmd:"):
        return CommandClient(selector[4:], temperature=temperature)
    if selector.startswith(("http:", "https:")):
        url = selector if selector.startswith(("http://", "https://")) else selector[5:]
        return HttpClient(url, temperature=temperature)
    raise AugmentError("CONFIG_ERROR", f"unknown client {selector!r}")


# ---------------------------------------------------------------------------
# repair loop


class RepairExhausted(AugmentError):
    def __init__(self, report: LintReport, iterations: int):
        super().__init__("REPAIR_EXHAUSTED", f"still {len(report.errors)} error(s) after {iterations} debug call(s)")
        self.report = report
        self.iterations = iterations


@dataclass
class RepairResult:
    netlist: Netlist
    top: str
    report: LintReport
    iterations: int  # debug calls made
    source: str


def _check(source: str, lib: CellLibrary | None) -> tuple[Netlist | None, str | None, LintReport]:
    try:
        nl = parse_netlist(source, lib)
    except NetlearnError as exc:
        loc = f"<source>:{exc.line or 0}:{exc.column or 0}"
        return None, None, LintReport([Diagnostic("error", exc.code, loc, exc.message)])
    if not nl.modules:
        return None, None, LintReport([Diagnostic("error", "SYNTAX_ERROR", "<source>:0:0", "no modules")])
    top = find_top(nl)
    return nl, top, lint_netlist(nl, lib, top)


def repair_loop(source: str, lib: CellLibrary | None, client: GeneratorClient, max_iters: int = 5) -> RepairResult:
    """Parse and lint; hand failures to ``client.debug`` up to ``max_iters`` times."""
    if max_iters < 1:
        raise AugmentError("CONFIG_ERROR", f"max_iters must be >= 1, got {max_iters}")
    nl, top, report = _check(source, lib)
    calls = 0
    while not report.ok:
        if calls == max_iters:
            raise RepairExhausted(report, calls)
        source = client.debug(source, report)
        calls += 1
        nl, top, report = _check(source, lib)
    return RepairResult(nl, top, report, calls, source)
