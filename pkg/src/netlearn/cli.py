"""``netlearn`` command line: one subcommand per pipeline stage plus ``pipeline``.

Exit codes: 0 success, 1 lint errors found, 2 user error (bad input, config
or I/O), 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .augment.client import make_client
from .augment.compose import compose_design, find_top
from .augment.curate import CurationConfig, curate, parse_curation_config
from .bench import HELD_OUT, operator_curation_config
from .errors import ConfigError, NetlearnError
from .graph import load_dataset, save_dataset, to_graph
from .model import load_checkpoint, save_checkpoint
from .netlist import (
    flatten,
    lint_netlist,
    load_cell_library,
    load_label_map,
    parse_netlist,
    write_netlist,
)
from .sampler import SamplerConfig
from .tasks import (
    TrainConfig,
    boundary_report,
    eval_graph,
    eval_node,
    train_graph,
    train_node,
)

EXIT_OK, EXIT_LINT, EXIT_USER, EXIT_INTERNAL = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# helpers


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise NetlearnError("IO_ERROR", f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _lib(args):
    return load_cell_library(_read(args.lib)) if getattr(args, "lib", None) else None


def _manifest(out: Path, command: str, args, config: dict, inputs, outputs, started: float) -> None:
    """One ``manifest.json`` per output directory; only ``wall_time_s`` varies between reruns."""
    argv = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "command": command,
        "arguments": argv,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha(p) for p in inputs},
        "outputs": {str(p): _sha(p) for p in outputs},
        "tool_version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    _write(out / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


_TRAIN_KEYS = {
    "learning_rate": float,
    "epochs": int,
    "K": int,
    "hidden": int,
    "init_scale": float,
    "optimizer": str,
    "momentum": float,
    "subgraphs_per_graph": int,
}
_SAMPLER_KEYS = {"roots": int, "walk_length": int, "norm_rounds": int}


def _train_configs(args) -> tuple[TrainConfig, SamplerConfig, str, dict]:
    raw = _kv(_read(args.config)) if args.config else {}
    train_kw, sampler_kw, task = {}, {}, raw.pop("task", "node")
    for k, v in raw.items():
        table = _TRAIN_KEYS if k in _TRAIN_KEYS else _SAMPLER_KEYS if k in _SAMPLER_KEYS else None
        if table is None:
            raise ConfigError(f"unknown training key {k!r}")
        try:
            (train_kw if table is _TRAIN_KEYS else sampler_kw)[k] = table[k](v)
        except ValueError:
            raise ConfigError(f"{k}: cannot read {v!r}") from None
    for k in ("epochs", "learning_rate"):
        if getattr(args, k, None) is not None:
            train_kw[k] = getattr(args, k)
    if task not in ("node", "graph"):
        raise ConfigError(f"task must be node or graph, got {task!r}")
    seed = args.seed if args.seed is not None else 0
    cfg = TrainConfig(seed=seed, **train_kw)
    scfg = SamplerConfig(seed=seed, normalize=not args.no_norm, **sampler_kw)
    snapshot = {"task": task, **vars(cfg), **{k: getattr(scfg, k) for k in ("roots", "walk_length", "norm_rounds", "normalize")}}
    return cfg, scfg, task, snapshot


def _curation_config(args) -> CurationConfig:
    overrides = {"seed": args.seed, "tau": getattr(args, "tau", None), "rho": getattr(args, "rho", None),
                 "client": getattr(args, "client", None)}
    if args.config:
        return parse_curation_config(_read(args.config), overrides)
    cfg = operator_curation_config(args.seed or 0)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


# ---------------------------------------------------------------------------
# subcommands


def cmd_lint(args) -> int:
    lib = _lib(args)
    worst = EXIT_OK
    for path in args.paths:
        nl = parse_netlist(_read(path), lib)
        if not nl.modules:
            print(f"{path}: no modules")
            worst = max(worst, EXIT_LINT)
            continue
        top = args.top or find_top(nl)
        report = lint_netlist(nl, lib, top)
        print(f"== {path} (top {top})")
        print(report.format())
        if not report.ok:
            worst = max(worst, EXIT_LINT)
    return worst


def cmd_gen(args) -> int:
    """Candidate sources per spec from the configured client, as ``dSSS_IIII.v``."""
    started = time.perf_counter()
    cfg = _curation_config(args)
    client = make_client(cfg.client, cfg.seed, temperature=cfg.temperature, **cfg.stub)
    out = Path(args.out)
    outputs = []

    def one(si: int):
        return si, client.generate(cfg.specs[si], cfg.count_for(si), cfg.temperature)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(one, range(len(cfg.specs))))
    for si, texts in results:
        for i, text in enumerate(texts):
            outputs.append(_write(out / f"d{si:03d}_{i:04d}.v", text))
    _manifest(out, "gen", args, cfg.snapshot(), [args.config] if args.config else [], outputs, started)
    print(f"wrote {len(outputs)} candidate(s) to {out}")
    return EXIT_OK


def _gen_sources(directory) -> dict[int, list[str]]:
    files = sorted(Path(directory).glob("d*_*.v"))
    if not files:
        raise NetlearnError("IO_ERROR", f"no candidate files in {directory}")
    sources: dict[int, list[str]] = {}
    for f in files:
        si = int(f.stem[1:].split("_")[0])
        sources.setdefault(si, []).append(_read(f))
    return sources


def cmd_curate(args) -> int:
    started = time.perf_counter()
    cfg = _curation_config(args)
    sources = _gen_sources(args.candidates) if args.candidates else None
    result = curate(cfg, lib=_lib(args), jobs=args.jobs, sources=sources)
    out = Path(args.out)
    outputs = [_write(out / "dataset.txt", result.dataset_text()), _write(out / "ledger.ndjson", result.ledger_text())]
    index = ["# id class arch width"]
    for d in result.designs:
        outputs.append(_write(out / "designs" / f"{d.design_id}.v", write_netlist(d.netlist)))
        index.append(f"{d.design_id} {d.spec.class_name} {d.spec.arch or '-'} {d.spec.width}")
    outputs.append(_write(out / "designs" / "index.txt", "\n".join(index) + "\n"))
    inputs = ([args.config] if args.config else []) + (sorted(Path(args.candidates).glob("d*_*.v")) if args.candidates else [])
    _manifest(out, "curate", args, cfg.snapshot(), inputs, outputs, started)
    kept = len(result.designs)
    print(f"kept {kept} of {len(result.records)} candidate(s); dataset and ledger in {out}")
    return EXIT_OK


def _holdout_map(text: str | None) -> dict[str, str]:
    if not text:
        return dict(HELD_OUT)
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"bad --holdout entry {item!r}, expected class=arch")
        cls, arch = item.split("=", 1)
        out[cls.strip()] = arch.strip()
    return out


def cmd_compose(args) -> int:
    """Random multi-block designs, one block per class, from curated designs."""
    started = time.perf_counter()
    src = Path(args.designs)
    entries = []
    for line in _read(src / "index.txt").splitlines():
        if line.strip() and not line.startswith("#"):
            did, cls, arch, _ = line.split()
            entries.append((did, cls, arch))
    holdout = _holdout_map(args.holdout)
    pool: dict[str, list[tuple[str, str]]] = {}
    for did, cls, arch in entries:
        unseen = holdout.get(cls) == arch
        if args.role == "all" or (args.role == "test") == unseen:
            pool.setdefault(cls, []).append((did, arch))
    if not pool:
        raise ConfigError(f"no curated designs qualify for role {args.role}")
    classes = sorted(pool)
    rng = np.random.default_rng([args.seed or 0, {"train": 1, "test": 2, "all": 3}[args.role]])
    cache = {}
    out = Path(args.out)
    outputs = []
    for i in range(args.count):
        blocks = []
        for cls in rng.permutation(classes).tolist():
            did, _ = pool[cls][int(rng.integers(len(pool[cls])))]
            if did not in cache:
                cache[did] = parse_netlist(_read(src / f"{did}.v"))
            blocks.append((cls, cache[did]))
        name = f"{args.role}{i:03d}"
        cd = compose_design(blocks, args.glue, int(rng.integers(2**31)), name=name)
        outputs.append(_write(out / f"{name}.v", write_netlist(cd.netlist)))
    all_classes = sorted({cls for _, cls, _ in entries})
    outputs.append(_write(out / "labelmap.txt", "".join(f"{c}_ {c}\n" for c in all_classes)))
    config = {"role": args.role, "count": args.count, "glue": args.glue, "holdout": holdout}
    _manifest(out, "compose", args, config, [src / "index.txt"], outputs, started)
    print(f"wrote {args.count} composed design(s) to {out}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    started = time.perf_counter()
    lib = _lib(args)
    labelmap = load_label_map(_read(args.labelmap)) if args.labelmap else {}
    classes = tuple(args.classes.split(",")) if args.classes else tuple(sorted(set(labelmap.values()) or {"OTHER"}))
    paths = [Path(p) for p in args.paths]

    def one(path: Path):
        nl = parse_netlist(_read(path), lib)
        top = args.top or find_top(nl)
        return to_graph(flatten(nl, lib, top, labelmap), classes, path.stem)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        graphs = list(pool.map(one, paths))
    out = Path(args.out)
    target = out / "dataset.txt"
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(graphs, target)
    inputs = paths + ([Path(args.labelmap)] if args.labelmap else [])
    _manifest(out, "featurize", args, {"classes": list(classes)}, inputs, [target], started)
    print(f"wrote {len(graphs)} graph(s) to {target}")
    return EXIT_OK


def cmd_train(args) -> int:
    started = time.perf_counter()
    cfg, scfg, task, snapshot = _train_configs(args)
    graphs = load_dataset(args.dataset)
    out = Path(args.out)
    lines = []

    def log(epoch, loss):
        lines.append(f"{epoch} {loss:.10g}")
        if args.verbose:
            print(f"epoch {epoch}: loss {loss:.6f}", file=sys.stderr)

    if task == "node":
        params, _ = train_node(graphs, cfg, scfg, log=log)
    else:
        params, _ = train_graph(graphs, cfg, log=log)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, out / "checkpoint.txt")
    _write(out / "history.txt", "# epoch mean-loss\n" + "\n".join(lines) + "\n")
    inputs = [Path(args.dataset)] + ([Path(args.config)] if args.config else [])
    _manifest(out, "train", args, snapshot, inputs, [out / "checkpoint.txt", out / "history.txt"], started)
    print(f"trained {task} model for {cfg.epochs} epoch(s); final loss {lines[-1].split()[1]}")
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.perf_counter()
    params = load_checkpoint(args.checkpoint)
    graphs = load_dataset(args.dataset)
    report = eval_graph(params, graphs) if args.task == "graph" else eval_node(params, graphs)
    out = Path(args.out)
    outputs = [_write(out / "report.json", report.to_json()), _write(out / "report.txt", report.to_table())]
    text = report.to_table()
    if args.target_class:
        p, r, f = boundary_report(params, graphs, args.target_class)
        table = (
            f"boundary  {args.target_class}\n"
            f"precision {p:.4f}\nrecall    {r:.4f}\nf1        {f:.4f}\n"
        )
        outputs.append(_write(out / "boundary.txt", table))
        text += table
    config = {"task": args.task, "target_class": args.target_class}
    _manifest(out, "eval", args, config, [Path(args.checkpoint), Path(args.dataset)], outputs, started)
    print(text, end="")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    """gen -> curate -> compose (train, test) -> featurize -> train -> eval under one directory."""
    out = Path(args.out)
    common = ["--seed", str(args.seed or 0)]
    cfg_args = ["--config", args.config] if args.config else []
    client = ["--client", args.client] if args.client else []
    extra = []
    if args.tau is not None:
        extra += ["--tau", str(args.tau)]
    if args.rho is not None:
        extra += ["--rho", str(args.rho)]
    def featurize(role):
        comp = out / f"compose-{role}"
        files = sorted(str(p) for p in comp.glob("*.v"))
        return ["featurize", *files, "--labelmap", str(comp / "labelmap.txt"), "--jobs", str(args.jobs),
                "--out", str(out / f"data-{role}")]

    steps = [
        lambda: ["gen", *cfg_args, *client, *common, "--jobs", str(args.jobs), "--out", str(out / "gen")],
        lambda: ["curate", *cfg_args, *client, *common, *extra, "--jobs", str(args.jobs),
                 "--candidates", str(out / "gen"), "--out", str(out / "curate")],
    ]
    for role, count in (("train", args.train_count), ("test", args.test_count)):
        steps.append(lambda role=role, count=count: [
            "compose", "--designs", str(out / "curate" / "designs"), "--role", role, "--count", str(count),
            *common, "--out", str(out / f"compose-{role}")])
        steps.append(lambda role=role: featurize(role))
    train = ["train", str(out / "data-train" / "dataset.txt"), *common, "--out", str(out / "model")]
    if args.train_config:
        train += ["--config", args.train_config]
    if args.epochs is not None:
        train += ["--epochs", str(args.epochs)]
    if args.no_norm:
        train.append("--no-norm")
    steps.append(lambda: train)
    ev = ["eval", str(out / "model" / "checkpoint.txt"), str(out / "data-test" / "dataset.txt"), "--out", str(out / "eval")]
    if args.target_class:
        ev += ["--target-class", args.target_class]
    steps.append(lambda: ev)
    for make in steps:
        step = make()
        print(f"$ netlearn {' '.join(step)}", file=sys.stderr)
        code = main(step)
        if code != EXIT_OK:
            return code
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netlearn", description="Gate-level netlist learning pipeline.")
    ap.add_argument("--version", action="version", version=f"netlearn {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        return p

    p = add("lint", cmd_lint, "check netlist files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--lib")
    p.add_argument("--top")

    for name, func, help_ in (("gen", cmd_gen, "generate candidate netlists"), ("curate", cmd_curate, "filter candidates into a dataset")):
        p = add(name, func, help_)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", required=True)
        p.add_argument("--client")
        p.add_argument("--lib")
        if name == "curate":
            p.add_argument("--candidates", help="directory written by gen")
            p.add_argument("--tau", type=float)
            p.add_argument("--rho", type=float)

    p = add("compose", cmd_compose, "compose curated designs into multi-block netlists")
    p.add_argument("--designs", required=True, help="designs directory written by curate")
    p.add_argument("--role", choices=("train", "test", "all"), default="all")
    p.add_argument("--holdout", help="class=arch,... architectures reserved for the test role")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--glue", type=float, default=0.3)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("featurize", cmd_featurize, "flatten netlists into a graph dataset")
    p.add_argument("paths", nargs="+")
    p.add_argument("--labelmap")
    p.add_argument("--classes", help="comma-separated class vocabulary")
    p.add_argument("--lib")
    p.add_argument("--top")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train a model on a dataset")
    p.add_argument("dataset")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--no-norm", action="store_true", help="disable sampler loss normalization")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--task", choices=("node", "graph"), default="node")
    p.add_argument("--target-class")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("pipeline", cmd_pipeline, "run every stage end to end")
    p.add_argument("--config")
    p.add_argument("--train-config")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--client")
    p.add_argument("--tau", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--no-norm", action="store_true")
    p.add_argument("--target-class")
    p.add_argument("--train-count", type=int, default=30)
    p.add_argument("--test-count", type=int, default=10)
    p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NetlearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001 - last-resort guard for the exit-code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
