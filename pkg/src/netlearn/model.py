"""Message-passing encoder, readout and classifier heads with exact gradients.

The encoder is a mean-aggregation GNN::

    h_v^0 = x_v
    h_v^k = relu(h_v^{k-1} W_self^k + mean_{u in N(v)} h_u^{k-1} W_neigh^k + b^k)

An empty neighbourhood contributes the zero vector. Both heads are one
hidden-layer MLPs followed by softmax; the graph head reads
``mean(Z) + max(Z)``. Gradients are accumulated by hand in reverse order
through exactly these operations, and :func:`grad_check` compares them to
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ModelError
from .graph import FEATURE_DIM, CircuitGraph

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelDims:
    d_in: int = FEATURE_DIM
    hidden: int = 128
    K: int = 2
    num_classes: int = 2


@dataclass
class ModelParams:
    dims: ModelDims
    arrays: dict[str, np.ndarray]
    seed: int = 0
    class_names: tuple[str, ...] = ()

    def names(self) -> list[str]:
        return list(self.arrays)

    def copy(self) -> ModelParams:
        return ModelParams(self.dims, {k: v.copy() for k, v in self.arrays.items()}, self.seed, self.class_names)

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def num_parameters(self) -> int:
        return sum(v.size for v in self.arrays.values())

    def equals(self, other: ModelParams) -> bool:
        return (
            self.dims == other.dims
            and self.arrays.keys() == other.arrays.keys()
            and all(np.array_equal(v, other.arrays[k]) for k, v in self.arrays.items())
        )


def param_shapes(dims: ModelDims) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    d = dims.d_in
    for k in range(1, dims.K + 1):
        shapes[f"layer{k}.w_self"] = (d, dims.hidden)
        shapes[f"layer{k}.w_neigh"] = (d, dims.hidden)
        shapes[f"layer{k}.bias"] = (dims.hidden,)
        d = dims.hidden
    for head in ("node", "graph"):
        shapes[f"{head}.w1"] = (d, dims.hidden)
        shapes[f"{head}.b1"] = (dims.hidden,)
        shapes[f"{head}.w2"] = (dims.hidden, dims.num_classes)
        shapes[f"{head}.b2"] = (dims.num_classes,)
    return shapes


def init_params(dims: ModelDims, seed: int = 0, scale: float = 1.0, class_names=()) -> ModelParams:
    """Weights ~ U[-s, s] with s = scale / sqrt(fan_in); biases zero."""
    if dims.K < 1 or dims.hidden < 1 or dims.num_classes < 1:
        raise ModelError("SHAPE_MISMATCH", f"invalid dims {dims}")
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in param_shapes(dims).items():
        if len(shape) == 1:
            arrays[name] = np.zeros(shape)
        else:
            s = scale / np.sqrt(shape[0])
            arrays[name] = rng.uniform(-s, s, size=shape)
    return ModelParams(dims, arrays, seed, tuple(class_names))


# ---------------------------------------------------------------------------
# forward / backward


def mean_operator(n: int, edges: np.ndarray) -> sp.csr_matrix:
    """Row-normalized adjacency; isolated nodes get an all-zero row."""
    if len(edges) == 0:
        return sp.csr_matrix((n, n))
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    vals = 1.0 / deg[rows]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def graph_inputs(g: CircuitGraph, restrict=None) -> tuple[np.ndarray, sp.csr_matrix]:
    """Features and mean operator, optionally confined to a subgraph."""
    if restrict is None:
        return g.features, mean_operator(g.num_nodes, g.edges)
    nodes = np.asarray(restrict.nodes, dtype=np.int64)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    edges = np.asarray(restrict.edges, dtype=np.int64).reshape(-1, 2)
    return g.features[nodes], mean_operator(len(nodes), local[edges] if len(edges) else edges)


def _check_input(p: ModelParams, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != p.dims.d_in:
        raise ModelError("SHAPE_MISMATCH", f"features have shape {X.shape}, model expects d_in={p.dims.d_in}")


def encode(p: ModelParams, X: np.ndarray, M: sp.csr_matrix):
    """Run the K layers; returns (Z, cache) where cache feeds :func:`encode_backward`."""
    _check_input(p, X)
    cache = []
    H = X
    for k in range(1, p.dims.K + 1):
        agg = M @ H
        pre = H @ p.arrays[f"layer{k}.w_self"] + agg @ p.arrays[f"layer{k}.w_neigh"] + p.arrays[f"layer{k}.bias"]
        cache.append((H, agg, pre))
        H = np.maximum(pre, 0.0)
    return H, cache


def encode_backward(p: ModelParams, M: sp.csr_matrix, cache, dZ: np.ndarray, grads: dict) -> None:
    dH = dZ
    for k in range(p.dims.K, 0, -1):
        H, agg, pre = cache[k - 1]
        dpre = dH * (pre > 0)
        grads[f"layer{k}.w_self"] += H.T @ dpre
        grads[f"layer{k}.w_neigh"] += agg.T @ dpre
        grads[f"layer{k}.bias"] += dpre.sum(axis=0)
        if k > 1:
            dH = dpre @ p.arrays[f"layer{k}.w_self"].T + M.T @ (dpre @ p.arrays[f"layer{k}.w_neigh"].T)


def gnn_forward(p: ModelParams, g: CircuitGraph, restrict=None) -> np.ndarray:
    """Node embeddings Z; with ``restrict`` only the subgraph's rows, in its node order."""
    X, M = graph_inputs(g, restrict)
    Z, _ = encode(p, X, M)
    return Z


def readout(X: np.ndarray) -> np.ndarray:
    """Column mean plus column max."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ModelError("EMPTY_GRAPH", "readout needs at least one row")
    return X.mean(axis=0) + X.max(axis=0)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ModelError("ZERO_NORM", "cosine similarity of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _mlp(p: ModelParams, head: str, H: np.ndarray):
    a1 = H @ p.arrays[f"{head}.w1"] + p.arrays[f"{head}.b1"]
    r1 = np.maximum(a1, 0.0)
    return r1 @ p.arrays[f"{head}.w2"] + p.arrays[f"{head}.b2"], (H, a1, r1)


def _mlp_backward(p: ModelParams, head: str, cache, dlogits: np.ndarray, grads: dict) -> np.ndarray:
    H, a1, r1 = cache
    grads[f"{head}.w2"] += r1.T @ dlogits
    grads[f"{head}.b2"] += dlogits.sum(axis=0)
    da1 = (dlogits @ p.arrays[f"{head}.w2"].T) * (a1 > 0)
    grads[f"{head}.w1"] += H.T @ da1
    grads[f"{head}.b1"] += da1.sum(axis=0)
    return da1 @ p.arrays[f"{head}.w1"].T


def node_head(p: ModelParams, Z: np.ndarray) -> np.ndarray:
    if Z.ndim != 2 or Z.shape[1] != p.arrays["node.w1"].shape[0]:
        raise ModelError("SHAPE_MISMATCH", f"embeddings of shape {Z.shape} do not fit the node head")
    logits, _ = _mlp(p, "node", Z)
    return softmax(logits)


def graph_head(p: ModelParams, Z: np.ndarray) -> np.ndarray:
    h = readout(Z)
    if h.shape[0] != p.arrays["graph.w1"].shape[0]:
        raise ModelError("SHAPE_MISMATCH", f"graph embedding of size {h.shape[0]} does not fit the graph head")
    logits, _ = _mlp(p, "graph", h[None, :])
    return softmax(logits)[0]


def _ce_grad(probs: np.ndarray, targets: np.ndarray, coef: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted clamped cross-entropy and its gradient w.r.t. logits."""
    rows = np.arange(len(targets))
    pt = probs[rows, targets]
    loss = float(np.sum(coef * -np.log(np.maximum(pt, PROB_FLOOR))))
    d = probs.copy()
    d[rows, targets] -= 1.0
    d *= (coef * (pt >= PROB_FLOOR))[:, None]
    return loss, d


def loss_and_grad(p: ModelParams, g: CircuitGraph, targets, weights=None, task: str = "node", restrict=None):
    """Loss and gradient for every parameter array.

    Node task: ``sum_v w_v * -log p_v[t_v] / sum_v w_v`` over the (sub)graph's
    nodes, in ``restrict.nodes`` order. Graph task: ``-log yhat[target]``.
    Probabilities are clamped at 1e-12 inside the log.
    """
    X, M = graph_inputs(g, restrict)
    Z, enc_cache = encode(p, X, M)
    grads = p.zeros_like()
    if task == "node":
        targets = np.asarray(targets, dtype=np.int64)
        if targets.shape != (Z.shape[0],):
            raise ModelError("SHAPE_MISMATCH", f"{targets.shape[0]} targets for {Z.shape[0]} nodes")
        w = np.ones(len(targets)) if weights is None else np.asarray(weights, dtype=np.float64)
        if w.shape != targets.shape:
            raise ModelError("SHAPE_MISMATCH", "weights and targets differ in length")
        if np.any(w < 0) or w.sum() <= 0:
            raise ModelError("SHAPE_MISMATCH", "weights must be non-negative with a positive sum")
        logits, mlp_cache = _mlp(p, "node", Z)
        loss, dlogits = _ce_grad(softmax(logits), targets, w / w.sum())
        dZ = _mlp_backward(p, "node", mlp_cache, dlogits, grads)
    elif task == "graph":
        target = int(np.asarray(targets).reshape(()))
        h = readout(Z)
        logits, mlp_cache = _mlp(p, "graph", h[None, :])
        loss, dlogits = _ce_grad(softmax(logits), np.array([target]), np.ones(1))
        dh = _mlp_backward(p, "graph", mlp_cache, dlogits, grads)[0]
        dZ = np.broadcast_to(dh / Z.shape[0], Z.shape).copy()
        arg = Z.argmax(axis=0)
        dZ[arg, np.arange(Z.shape[1])] += dh
    else:
        raise ModelError("SHAPE_MISMATCH", f"unknown task {task!r}")
    encode_backward(p, M, enc_cache, dZ, grads)
    return loss, grads


def loss_only(p: ModelParams, g: CircuitGraph, targets, weights=None, task: str = "node", restrict=None) -> float:
    X, M = graph_inputs(g, restrict)
    Z, _ = encode(p, X, M)
    if task == "node":
        targets = np.asarray(targets, dtype=np.int64)
        w = np.ones(len(targets)) if weights is None else np.asarray(weights, dtype=np.float64)
        probs = node_head(p, Z)
        pt = probs[np.arange(len(targets)), targets]
        return float(np.sum(w / w.sum() * -np.log(np.maximum(pt, PROB_FLOOR))))
    probs = graph_head(p, Z)
    return float(-np.log(max(probs[int(np.asarray(targets).reshape(()))], PROB_FLOOR)))


# ---------------------------------------------------------------------------
# gradient check


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    worst: tuple[str, tuple[int, ...]] | None
    checked: int
    tolerance: float
    details: list = field(default_factory=list, repr=False)


def grad_check(
    p: ModelParams,
    g: CircuitGraph,
    targets,
    epsilon: float = 1e-4,
    tolerance: float = 1e-4,
    *,
    weights=None,
    task: str = "node",
    restrict=None,
    analytic: dict | None = None,
    abs_floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients with (L(t+e) - L(t-e)) / 2e, entry by entry.

    The error of an entry is ``|a - n| / max(|a|, |n|)``; when both are below
    ``abs_floor`` (e.g. a dead ReLU path) the absolute difference is used.
    ``analytic`` overrides the gradients under test.
    """
    if epsilon <= 0:
        raise ModelError("BAD_EPSILON", "epsilon must be positive")
    if analytic is None:
        _, analytic = loss_and_grad(p, g, targets, weights, task, restrict)
    q = p.copy()
    worst, worst_err, checked = None, 0.0, 0
    details = []
    for name, arr in q.arrays.items():
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + epsilon
            up = loss_only(q, g, targets, weights, task, restrict)
            arr[idx] = orig - epsilon
            down = loss_only(q, g, targets, weights, task, restrict)
            arr[idx] = orig
            num = (up - down) / (2 * epsilon)
            a = float(analytic[name][idx])
            scale = max(abs(a), abs(num))
            err = abs(a - num) / scale if scale >= abs_floor else abs(a - num)
            details.append((name, idx, a, num, err))
            checked += 1
            if err > worst_err or worst is None:
                worst_err, worst = err, (name, idx)
    return GradCheckReport(worst_err, worst_err < tolerance, worst, checked, tolerance, details)


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = "NETLEARN-CHECKPOINT 1"


def dump_checkpoint(p: ModelParams) -> str:
    d = p.dims
    lines = [
        _MAGIC,
        f"dims d_in={d.d_in} hidden={d.hidden} K={d.K} num_classes={d.num_classes} seed={p.seed}",
        "classes" + "".join(" " + c for c in p.class_names),
    ]
    for name, arr in p.arrays.items():
        lines.append(f"param {name} {' '.join(str(s) for s in arr.shape)}")
        rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
        for row in rows:
            lines.append(" ".join(format(float(x), ".17g") for x in row))
    return "\n".join(lines) + "\n"


def parse_checkpoint(text: str) -> ModelParams:
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ModelError("FORMAT_ERROR", "not a checkpoint file", line=1)
    try:
        fields = dict(kv.split("=") for kv in lines[1].split()[1:])
        dims = ModelDims(int(fields["d_in"]), int(fields["hidden"]), int(fields["K"]), int(fields["num_classes"]))
        seed = int(fields["seed"])
    except (KeyError, ValueError, IndexError):
        raise ModelError("FORMAT_ERROR", "bad dims line", line=2) from None
    class_names = tuple(lines[2].split()[1:]) if len(lines) > 2 and lines[2].startswith("classes") else ()
    shapes = param_shapes(dims)
    arrays = {}
    i = 3
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if head[0] != "param" or head[1] not in shapes:
            raise ModelError("FORMAT_ERROR", f"unexpected line {lines[i]!r}", line=i + 1)
        name, shape = head[1], tuple(int(s) for s in head[2:])
        if shape != shapes[name]:
            raise ModelError("FORMAT_ERROR", f"{name} has shape {shape}, expected {shapes[name]}", line=i + 1)
        nrows = shape[0] if len(shape) > 1 else 1
        try:
            vals = [float(t) for line in lines[i + 1 : i + 1 + nrows] for t in line.split()]
        except ValueError:
            raise ModelError("FORMAT_ERROR", f"malformed values for {name}", line=i + 2) from None
        if len(vals) != int(np.prod(shape)):
            raise ModelError("FORMAT_ERROR", f"{name}: expected {int(np.prod(shape))} values", line=i + 2)
        arrays[name] = np.array(vals, dtype=np.float64).reshape(shape)
        i += 1 + nrows
    missing = set(shapes) - set(arrays)
    if missing:
        raise ModelError("FORMAT_ERROR", f"missing parameters {sorted(missing)}")
    return ModelParams(dims, {k: arrays[k] for k in shapes}, seed, class_names)


def save_checkpoint(p: ModelParams, path) -> None:
    Path(path).write_text(dump_checkpoint(p), encoding="utf-8")


def load_checkpoint(path) -> ModelParams:
    return parse_checkpoint(Path(path).read_text(encoding="utf-8"))
