"""Training loops, evaluation and classification metrics.

Node task: label every gate of a flattened design with the functional block
it came from. Graph task: label a whole design. Training draws random-walk
subgraphs per graph; evaluation always runs on full graphs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TaskError
from .graph import CircuitGraph
from .model import (
    ModelDims,
    ModelParams,
    gnn_forward,
    graph_head,
    init_params,
    loss_and_grad,
    node_head,
)
from .sampler import SamplerConfig, estimate_loss_weights, random_walk_sample


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    seed: int = 0
    K: int = 2
    hidden: int = 128
    init_scale: float = 1.0
    optimizer: str = "momentum"  # "sgd" | "momentum"
    momentum: float = 0.9
    subgraphs_per_graph: int | None = None  # None: enough to cover the graph once per epoch

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning rate must be non-negative, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer not in ("sgd", "momentum"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


# ---------------------------------------------------------------------------
# metrics


def safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = safe_div(tp, tp + fp)
    recall = safe_div(tp, tp + fn)
    return precision, recall, safe_div(2 * precision * recall, precision + recall)


@dataclass
class EvalReport:
    class_names: list[str]
    confusion: np.ndarray  # rows: true class, columns: predicted class
    per_class: dict[str, dict] = field(default_factory=dict)
    f1_micro: float = 0.0
    f1_macro: float = 0.0

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return safe_div(float(np.trace(self.confusion)), float(total))

    def to_dict(self) -> dict:
        return {
            "f1_micro": self.f1_micro,
            "f1_macro": self.f1_macro,
            "per_class": self.per_class,
            "class_names": list(self.class_names),
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        width = max([len(c) for c in self.per_class] + [5])
        lines = [f"{'class':<{width}}  precision  recall      f1  support"]
        for name, m in self.per_class.items():
            lines.append(
                f"{name:<{width}}  {m['precision']:9.4f}  {m['recall']:6.4f}  {m['f1']:6.4f}  {m['support']:7d}"
            )
        lines.append(f"F1-micro {self.f1_micro:.4f}   F1-macro {self.f1_macro:.4f}")
        return "\n".join(lines) + "\n"


def evaluate_predictions(y_true, y_pred, class_names) -> EvalReport:
    """Per-class and averaged scores.

    Macro averages over classes present in either the labels or the
    predictions; a zero denominator yields 0 for that score.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise TaskError("SHAPE_MISMATCH", "labels and predictions differ in length")
    c = len(class_names)
    conf = np.zeros((c, c), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    per_class = {}
    tp_sum = fp_sum = fn_sum = 0
    present = sorted(set(y_true.tolist()) | set(y_pred.tolist()))
    for k in present:
        tp = int(conf[k, k])
        fp = int(conf[:, k].sum() - tp)
        fn = int(conf[k, :].sum() - tp)
        p, r, f = prf(tp, fp, fn)
        per_class[class_names[k]] = {"precision": p, "recall": r, "f1": f, "support": int(conf[k, :].sum())}
        tp_sum, fp_sum, fn_sum = tp_sum + tp, fp_sum + fp, fn_sum + fn
    f1_micro = prf(tp_sum, fp_sum, fn_sum)[2]
    f1_macro = safe_div(sum(m["f1"] for m in per_class.values()), len(per_class))
    return EvalReport(list(class_names), conf, per_class, f1_micro, f1_macro)


# ---------------------------------------------------------------------------
# training


def _check_dataset(graphs: list[CircuitGraph]) -> tuple[str, ...]:
    if not graphs:
        raise ConfigError("empty training set")
    classes = graphs[0].class_names
    for g in graphs:
        if g.class_names != classes:
            raise ConfigError(f"graph {g.name} has classes {g.class_names}, expected {classes}")
        if g.num_nodes == 0:
            raise ConfigError(f"graph {g.name} has no nodes")
    return classes


class _Optimizer:
    def __init__(self, cfg: TrainConfig, params: ModelParams):
        self.cfg = cfg
        self.velocity = params.zeros_like() if cfg.optimizer == "momentum" else None

    def step(self, params: ModelParams, grads: dict) -> None:
        lr = self.cfg.learning_rate
        for name, arr in params.arrays.items():
            g = grads[name]
            if self.velocity is not None:
                v = self.velocity[name]
                v *= self.cfg.momentum
                v += g
                g = v
            arr -= lr * g


def _subgraph_count(g: CircuitGraph, cfg: TrainConfig, scfg: SamplerConfig) -> int:
    if cfg.subgraphs_per_graph is not None:
        return cfg.subgraphs_per_graph
    return max(1, math.ceil(g.num_nodes / (scfg.roots * (scfg.walk_length + 1))))


def train_node(graphs: list[CircuitGraph], cfg: TrainConfig, scfg: SamplerConfig | None = None, *, log=None):
    """Subgraph-sampled training of encoder + node head.

    Returns ``(params, history)`` where ``history`` holds the mean weighted
    loss of each epoch.
    """
    scfg = scfg or SamplerConfig(seed=cfg.seed)
    classes = _check_dataset(graphs)
    dims = ModelDims(graphs[0].features.shape[1], cfg.hidden, cfg.K, len(classes))
    params = init_params(dims, cfg.seed, cfg.init_scale, classes)
    if scfg.normalize:
        weights = [
            estimate_loss_weights(g, SamplerConfig(scfg.roots, scfg.walk_length, scfg.seed + i, scfg.norm_rounds))
            for i, g in enumerate(graphs)
        ]
    else:
        weights = [np.ones(g.num_nodes) for g in graphs]
    rng = np.random.default_rng([cfg.seed, scfg.seed, 1])
    opt = _Optimizer(cfg, params)
    history = []
    for epoch in range(cfg.epochs):
        losses = []
        for gi in rng.permutation(len(graphs)).tolist():
            g = graphs[gi]
            for _ in range(_subgraph_count(g, cfg, scfg)):
                sub = random_walk_sample(g, scfg, rng, weights[gi])
                loss, grads = loss_and_grad(params, g, g.labels[sub.nodes], sub.weights, "node", sub)
                opt.step(params, grads)
                losses.append(loss)
        history.append(float(np.mean(losses)))
        if log is not None:
            log(epoch, history[-1])
    return params, history


def predict_nodes(params: ModelParams, g: CircuitGraph) -> np.ndarray:
    return node_head(params, gnn_forward(params, g)).argmax(axis=1)


def _align(params: ModelParams, g: CircuitGraph) -> None:
    if params.class_names and tuple(params.class_names) != tuple(g.class_names):
        raise TaskError("CLASS_MISMATCH", f"graph {g.name} classes {g.class_names} != model {params.class_names}")


def eval_node(params: ModelParams, graphs: list[CircuitGraph]) -> EvalReport:
    if not graphs:
        raise TaskError("EMPTY_DATASET", "nothing to evaluate")
    y_true, y_pred = [], []
    for g in graphs:
        _align(params, g)
        y_true.append(g.labels)
        y_pred.append(predict_nodes(params, g))
    return evaluate_predictions(np.concatenate(y_true), np.concatenate(y_pred), graphs[0].class_names)


def train_graph(graphs: list[CircuitGraph], cfg: TrainConfig, *, log=None):
    """Full-graph training of encoder + graph head on each graph's majority label."""
    classes = _check_dataset(graphs)
    dims = ModelDims(graphs[0].features.shape[1], cfg.hidden, cfg.K, len(classes))
    params = init_params(dims, cfg.seed, cfg.init_scale, classes)
    rng = np.random.default_rng([cfg.seed, 2])
    opt = _Optimizer(cfg, params)
    targets = [g.graph_label for g in graphs]
    history = []
    for epoch in range(cfg.epochs):
        losses = []
        for gi in rng.permutation(len(graphs)).tolist():
            loss, grads = loss_and_grad(params, graphs[gi], targets[gi], task="graph")
            opt.step(params, grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        if log is not None:
            log(epoch, history[-1])
    return params, history


def predict_graph(params: ModelParams, g: CircuitGraph) -> int:
    return int(graph_head(params, gnn_forward(params, g)).argmax())


def eval_graph(params: ModelParams, graphs: list[CircuitGraph]) -> EvalReport:
    if not graphs:
        raise TaskError("EMPTY_DATASET", "nothing to evaluate")
    for g in graphs:
        _align(params, g)
    y_true = [g.graph_label for g in graphs]
    y_pred = [predict_graph(params, g) for g in graphs]
    return evaluate_predictions(y_true, y_pred, graphs[0].class_names)


def boundary_scores(y_true, y_pred, target: int) -> tuple[float, float, float]:
    t = np.asarray(y_true) == target
    p = np.asarray(y_pred) == target
    return prf(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(t & ~p)))


def boundary_report(params: ModelParams, graphs, target_class: str) -> tuple[float, float, float]:
    """Precision, recall and F1 of ``target_class`` against all other classes.

    ``graphs`` is one graph or a list; scores pool every node.
    """
    graphs = [graphs] if isinstance(graphs, CircuitGraph) else list(graphs)
    if not graphs:
        raise TaskError("EMPTY_DATASET", "nothing to evaluate")
    names = graphs[0].class_names
    if target_class not in names:
        raise TaskError("UNKNOWN_CLASS", f"class {target_class!r} not in {list(names)}")
    y_true, y_pred = [], []
    for g in graphs:
        _align(params, g)
        y_true.append(g.labels)
        y_pred.append(predict_nodes(params, g))
    return boundary_scores(np.concatenate(y_true), np.concatenate(y_pred), names.index(target_class))
