import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netlearn.errors import ModelError
from netlearn.graph import random_graph
from netlearn.model import (
    ModelDims,
    cosine_similarity,
    dump_checkpoint,
    encode,
    gnn_forward,
    grad_check,
    graph_head,
    init_params,
    load_checkpoint,
    loss_and_grad,
    mean_operator,
    node_head,
    parse_checkpoint,
    readout,
    save_checkpoint,
    softmax,
)


def small_graph(n=5, m=6, seed=0, classes=("A", "B", "C")):
    return random_graph(n, m, np.random.default_rng(seed), class_names=classes)


def jittered(p, seed):
    # zero biases put ReLUs of all-zero rows exactly on the kink, where
    # central differences see half a slope; move every bias off it
    rng = np.random.default_rng(seed)
    for name, arr in p.arrays.items():
        if arr.ndim == 1:
            arr[:] = rng.uniform(-0.5, 0.5, size=arr.shape)
    return p


def dense_forward(p, X, edges):
    """Dense-adjacency oracle for the encoder."""
    n = X.shape[0]
    A = np.zeros((n, n))
    for u, v in edges:
        A[u, v] = A[v, u] = 1.0
    deg = A.sum(axis=1)
    H = X
    for k in range(1, p.dims.K + 1):
        agg = np.zeros((n, H.shape[1]))
        for v in range(n):
            if deg[v]:
                agg[v] = A[v] @ H / deg[v]
        H = np.maximum(H @ p.arrays[f"layer{k}.w_self"] + agg @ p.arrays[f"layer{k}.w_neigh"] + p.arrays[f"layer{k}.bias"], 0)
    return H


def zero_params(dims):
    p = init_params(dims, 0)
    for v in p.arrays.values():
        v[...] = 0
    return p


# ---------------------------------------------------------------------------
# encoder


def test_isolated_node_uses_self_term_only():
    g = random_graph(1, 0, np.random.default_rng(2))
    p = init_params(ModelDims(hidden=6, K=2, num_classes=2), seed=3)
    for k in (1, 2):
        p.arrays[f"layer{k}.bias"][:] = 0.1
    h = g.features[0]
    for k in (1, 2):
        h = np.maximum(h @ p.arrays[f"layer{k}.w_self"] + p.arrays[f"layer{k}.bias"], 0)
    assert np.allclose(gnn_forward(p, g)[0], h, rtol=0, atol=1e-12)


def test_zero_weights_give_zero_embeddings():
    g = small_graph()
    assert not gnn_forward(zero_params(ModelDims(hidden=8, num_classes=3)), g).any()


def test_path_graph_hand_computation():
    dims = ModelDims(d_in=2, hidden=2, K=1, num_classes=2)
    p = zero_params(dims)
    p.arrays["layer1.w_self"][:] = [[1.0, -1.0], [0.5, 2.0]]
    p.arrays["layer1.w_neigh"][:] = [[0.0, 1.0], [1.0, 0.0]]
    p.arrays["layer1.bias"][:] = [0.1, -0.2]
    X = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]])
    M = mean_operator(3, np.array([[0, 1], [1, 2]]))
    Z, _ = encode(p, X, M)
    # node 0: self [1,-1] + neigh mean(x1)=[0,1]->[1,0] + b -> [2.1, -1.2] -> relu [2.1, 0]
    # node 1: self [0.5,2] + mean(x0,x2)=[1.5,0.5]->[0.5,1.5] + b -> [1.1, 3.3]
    # node 2: self [2.5,0] + mean(x1)=[0,1]->[1,0] + b -> [3.6, -0.2] -> [3.6, 0]
    assert np.allclose(Z, [[2.1, 0.0], [1.1, 3.3], [3.6, 0.0]], atol=1e-12)


@pytest.mark.parametrize("K", [1, 2, 3])
def test_encoder_matches_dense_oracle(K):
    g = small_graph(9, 14, seed=K)
    p = init_params(ModelDims(hidden=7, K=K, num_classes=3), seed=K)
    assert np.allclose(gnn_forward(p, g), dense_forward(p, g.features, g.edges), rtol=1e-12, atol=1e-12)


def test_shape_mismatch():
    g = small_graph()
    p = init_params(ModelDims(d_in=4, hidden=3, num_classes=3))
    with pytest.raises(ModelError) as exc:
        gnn_forward(p, g)
    assert exc.value.code == "SHAPE_MISMATCH"


def test_locality_outside_k_hops():
    # path 0-1-2-3-4-5, K=2: node 0 sees nodes 0..2 only
    rng = np.random.default_rng(0)
    g = random_graph(6, 0, rng)
    from netlearn.graph import make_graph

    edges = [(i, i + 1) for i in range(5)]
    base = make_graph("p", g.functions, edges, g.labels, g.class_names, g.pi_flags, g.po_flags, g.in_degree, g.out_degree)
    far = make_graph(
        "p", g.functions[:3] + ("MUX", "DFF", "XOR"), edges, g.labels, g.class_names,
        g.pi_flags, np.r_[g.po_flags[:3], 1 - g.po_flags[3:]], g.in_degree + np.r_[0, 0, 0, 4, 5, 6], g.out_degree,
    )
    p = init_params(ModelDims(hidden=5, K=2, num_classes=1), seed=1)
    za, zb = gnn_forward(p, base), gnn_forward(p, far)
    assert np.array_equal(za[0], zb[0])
    assert not np.array_equal(za[3], zb[3])


# ---------------------------------------------------------------------------
# readout and similarity


def test_readout_examples():
    assert readout(np.array([[1.0, 3.0], [3.0, 1.0]])).tolist() == [5.0, 5.0]
    x = np.array([[0.5, -2.0, 7.0]])
    assert np.array_equal(readout(x), 2 * x[0])
    rows = np.random.default_rng(0).normal(size=(6, 4))
    assert np.allclose(readout(rows), readout(rows[::-1]), atol=0)


def test_readout_empty():
    with pytest.raises(ModelError) as exc:
        readout(np.zeros((0, 3)))
    assert exc.value.code == "EMPTY_GRAPH"


def test_cosine_examples():
    a = np.array([0.3, -1.2, 4.0])
    assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 2], [2, 4]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ModelError) as exc:
        cosine_similarity([0, 0], [1, 2])
    assert exc.value.code == "ZERO_NORM"


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.floats(0.01, 100),
)
def test_property_cosine(a, b, lam):
    a, b = np.array(a), np.array(b)
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
        return
    s = cosine_similarity(a, b)
    assert -1 <= s <= 1
    assert s == pytest.approx(cosine_similarity(b, a), abs=1e-12)
    assert s == pytest.approx(cosine_similarity(lam * a, b), abs=1e-9)


# ---------------------------------------------------------------------------
# heads


def test_zero_logits_uniform():
    p = zero_params(ModelDims(hidden=4, num_classes=5))
    probs = node_head(p, np.random.default_rng(0).normal(size=(3, 4)))
    assert np.allclose(probs, 0.2, atol=1e-15)
    assert np.allclose(graph_head(p, np.ones((2, 4))), 0.2, atol=1e-15)


def test_softmax_shift_invariance_and_two_class_formula():
    logits = np.array([[2.0, 0.0], [5.0, 1.0]])
    assert np.allclose(softmax(logits), softmax(logits + 123.0), atol=1e-15)
    e2 = math.exp(2)
    assert np.allclose(softmax(np.array([2.0, 0.0])), [e2 / (e2 + 1), 1 / (e2 + 1)], atol=1e-15)


def test_node_head_rows_sum_to_one():
    p = init_params(ModelDims(hidden=16, num_classes=4), seed=5)
    g = small_graph(12, 20)
    probs = node_head(p, gnn_forward(p, g))
    assert np.all(np.abs(probs.sum(axis=1) - 1) < 1e-9)
    assert np.all((probs > 0) & (probs < 1))


def test_graph_head_one_hidden_unit_by_hand():
    dims = ModelDims(d_in=15, hidden=1, K=1, num_classes=2)
    p = zero_params(dims)
    rng = np.random.default_rng(4)
    for name in p.arrays:
        p.arrays[name][...] = rng.uniform(-1, 1, size=p.arrays[name].shape)
    g = random_graph(2, 1, rng)
    x = g.features.tolist()
    ws = [r[0] for r in p.arrays["layer1.w_self"].tolist()]
    wn = [r[0] for r in p.arrays["layer1.w_neigh"].tolist()]
    b = p.arrays["layer1.bias"][0]
    z = []
    for v in range(2):
        other = x[1 - v]
        s = sum(x[v][i] * ws[i] for i in range(15)) + sum(other[i] * wn[i] for i in range(15)) + b
        z.append(max(s, 0.0))
    h = (z[0] + z[1]) / 2 + max(z)
    a = max(h * p.arrays["graph.w1"][0, 0] + p.arrays["graph.b1"][0], 0.0)
    l0 = a * p.arrays["graph.w2"][0, 0] + p.arrays["graph.b2"][0]
    l1 = a * p.arrays["graph.w2"][0, 1] + p.arrays["graph.b2"][1]
    want = [math.exp(l0) / (math.exp(l0) + math.exp(l1)), math.exp(l1) / (math.exp(l0) + math.exp(l1))]
    assert np.allclose(graph_head(p, gnn_forward(p, g)), want, atol=1e-12)


def test_permutation_equivariance_and_invariance():
    g = small_graph(10, 18, seed=7)
    p = init_params(ModelDims(hidden=12, num_classes=3), seed=2)
    perm = np.random.default_rng(3).permutation(10)
    h = g.permuted(perm)
    za, zb = gnn_forward(p, g), gnn_forward(p, h)
    assert np.allclose(zb, za[perm], atol=1e-12)
    assert np.allclose(graph_head(p, zb), graph_head(p, za), atol=1e-12)


# ---------------------------------------------------------------------------
# loss


def test_uniform_predictions_loss_is_log_c():
    g = small_graph(6, 7)
    p = zero_params(ModelDims(hidden=4, num_classes=3))
    loss, _ = loss_and_grad(p, g, np.zeros(6, dtype=int))
    assert loss == pytest.approx(math.log(3), abs=1e-12)
    loss, _ = loss_and_grad(p, g, 2, task="graph")
    assert loss == pytest.approx(math.log(3), abs=1e-12)


def test_confident_correct_predictions_loss_near_zero_and_clamp():
    g = small_graph(4, 3, classes=("A", "B"))
    p = zero_params(ModelDims(hidden=4, num_classes=2))
    p.arrays["node.b2"][:] = [60.0, 0.0]
    loss, _ = loss_and_grad(p, g, np.zeros(4, dtype=int))
    assert 0 <= loss < 1e-20
    p.arrays["node.b2"][:] = [0.0, 1000.0]
    loss, _ = loss_and_grad(p, g, np.zeros(4, dtype=int))
    assert loss == pytest.approx(-math.log(1e-12))


def test_weighted_loss_formula():
    g = small_graph(5, 6)
    p = init_params(ModelDims(hidden=6, num_classes=3), seed=1)
    t = np.array([0, 1, 2, 1, 0])
    w = np.array([1.0, 2.0, 0.5, 3.0, 0.0])
    probs = node_head(p, gnn_forward(p, g))
    want = sum(w[v] * -math.log(probs[v, t[v]]) for v in range(5)) / w.sum()
    assert loss_and_grad(p, g, t, w)[0] == pytest.approx(want, rel=1e-12)


def test_bad_targets_and_weights():
    g = small_graph(5, 6)
    p = init_params(ModelDims(hidden=4, num_classes=3))
    for targets, weights in ((np.zeros(4, dtype=int), None), (np.zeros(5, dtype=int), -np.ones(5))):
        with pytest.raises(ModelError) as exc:
            loss_and_grad(p, g, targets, weights)
        assert exc.value.code == "SHAPE_MISMATCH"


# ---------------------------------------------------------------------------
# gradient check


@pytest.mark.parametrize("task", ["node", "graph"])
def test_grad_check_k1_hidden4_five_nodes(task):
    g = small_graph(5, 6, seed=11)
    p = jittered(init_params(ModelDims(hidden=4, K=1, num_classes=3), seed=11), 11)
    targets = np.array([0, 1, 2, 0, 1]) if task == "node" else 1
    rep = grad_check(p, g, targets, 1e-4, 1e-4, task=task)
    assert rep.passed, rep
    assert rep.checked == p.num_parameters()


def test_grad_check_with_weights_and_subgraph():
    from netlearn.sampler import SamplerConfig, random_walk_sample

    g = small_graph(8, 12, seed=5)
    p = jittered(init_params(ModelDims(hidden=4, K=2, num_classes=3), seed=5), 5)
    sub = random_walk_sample(g, SamplerConfig(roots=2, walk_length=2), np.random.default_rng(0), np.arange(1, 9.0))
    rep = grad_check(p, g, g.labels[sub.nodes] * 0 + 2, weights=sub.weights, restrict=sub)
    assert rep.passed, rep


def test_dead_relu_uses_absolute_fallback():
    g = small_graph(5, 6)
    p = init_params(ModelDims(hidden=4, K=1, num_classes=3), seed=0)
    p.arrays["layer1.bias"][:] = -1e3
    p.arrays["node.b1"][:] = 0.5
    _, grads = loss_and_grad(p, g, np.zeros(5, dtype=int))
    assert not grads["layer1.w_self"].any()
    rep = grad_check(p, g, np.zeros(5, dtype=int))
    assert rep.passed


def test_corrupted_gradient_fails():
    g = small_graph(5, 6)
    p = init_params(ModelDims(hidden=4, K=1, num_classes=3), seed=0)
    _, grads = loss_and_grad(p, g, np.zeros(5, dtype=int))
    grads["node.w2"][0, 0] += 1.0
    rep = grad_check(p, g, np.zeros(5, dtype=int), analytic=grads)
    assert not rep.passed
    assert rep.worst == ("node.w2", (0, 0))


def test_bad_epsilon():
    g = small_graph()
    p = init_params(ModelDims(hidden=2, K=1, num_classes=3))
    with pytest.raises(ModelError) as exc:
        grad_check(p, g, np.zeros(5, dtype=int), epsilon=0)
    assert exc.value.code == "BAD_EPSILON"


# ---------------------------------------------------------------------------
# init and checkpoints


def test_init_is_seeded_and_bounded():
    dims = ModelDims(hidden=9, K=2, num_classes=4)
    a, b = init_params(dims, 5), init_params(dims, 5)
    assert a.equals(b)
    assert not a.equals(init_params(dims, 6))
    w = a.arrays["layer1.w_self"]
    assert np.all(np.abs(w) <= 1 / math.sqrt(15))
    assert not a.arrays["layer1.bias"].any()


def test_checkpoint_round_trip_bit_identical(tmp_path):
    p = init_params(ModelDims(hidden=8, K=2, num_classes=3), seed=4, class_names=("a", "b", "c"))
    p.arrays["node.b2"][:] = [1 / 3, -2e-300, 1e300]
    path = tmp_path / "ck.txt"
    save_checkpoint(p, path)
    q = load_checkpoint(path)
    assert q.equals(p) and q.class_names == p.class_names and q.seed == 4
    g = small_graph(7, 9)
    assert np.array_equal(node_head(q, gnn_forward(q, g)), node_head(p, gnn_forward(p, g)))
    assert dump_checkpoint(q) == path.read_text()


def test_checkpoint_format_errors():
    with pytest.raises(ModelError):
        parse_checkpoint("not a checkpoint\n")
    text = dump_checkpoint(init_params(ModelDims(hidden=2, K=1, num_classes=2)))
    with pytest.raises(ModelError):
        parse_checkpoint(text.rsplit("\n", 2)[0])
