import numpy as np
import pytest

from csgnn import kernels
from csgnn.checkpoint import load_checkpoint, save_checkpoint
from csgnn.encoder import GnnParams, backward, forward
from csgnn.graph import generate_synthetic, graph_from_pairs
from csgnn.sampler import full_sample


def _line_graph(n, feature_dim=2, seed=0):
    pairs = [(i, i + 1) for i in range(n - 1)]
    rng = np.random.default_rng(seed)
    labels = np.zeros(n, dtype=np.int64)
    labels[n // 2:] = 1
    return graph_from_pairs(pairs, rng.normal(size=(n, feature_dim)), labels)


def test_isolated_node_keeps_own_embedding():
    g = graph_from_pairs([(0, 1)], np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]),
                         np.array([0, 1, 1]))
    params = GnnParams(weights=[np.eye(2)])
    z, _ = forward(params, full_sample(g), g.features)
    assert np.allclose(z[2], [5.0, 6.0])


def test_hand_computed_mean_aggregation():
    # node 0 is [1,1] with neighbors [1,0] and [0,1]; identity weights
    g = graph_from_pairs([(0, 1), (0, 2)],
                         np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]),
                         np.array([0, 1, 1]))
    params = GnnParams(weights=[np.eye(2)])
    z, _ = forward(params, full_sample(g), g.features)
    assert np.allclose(z[0], [2.0 / 3.0, 2.0 / 3.0], atol=1e-15)


def test_zero_weights_zero_logits():
    g = _line_graph(5)
    params = GnnParams(weights=[np.zeros((2, 2))])
    z, _ = forward(params, full_sample(g), g.features)
    assert np.array_equal(z, np.zeros((5, 2)))


def test_single_layer_identity_equals_brute_force_mean():
    g = generate_synthetic(n=40, k=2, ir=0.5, homophily=0.6, feature_dim=3,
                           class_separation=1.0, seed=6)
    params = GnnParams(weights=[np.eye(3)])
    z, _ = forward(params, full_sample(g), g.features)
    for v in range(g.num_nodes):
        group = np.concatenate([[v], g.neighbors(v)])
        assert np.allclose(z[v], g.features[group].mean(axis=0), atol=1e-12)


def test_zero_upstream_gradient_gives_zero_parameter_gradients():
    g = _line_graph(6)
    params = GnnParams.init(2, 3, 2, num_layers=2, seed=0)
    z, cache = forward(params, full_sample(g), g.features)
    grad_w, _ = backward(cache, np.zeros_like(z))
    for gw in grad_w:
        assert np.array_equal(gw, np.zeros_like(gw))


def _loss_through(params, sg, x, target):
    z, _ = forward(params, sg, x)
    return float(np.sum(z * target))


def test_backward_matches_finite_differences_small():
    g = _line_graph(2)
    params = GnnParams.init(2, 4, 2, num_layers=1, seed=3)
    sg = full_sample(g)
    rng = np.random.default_rng(0)
    target = rng.normal(size=(2, 2))
    z, cache = forward(params, sg, g.features)
    grad_w, _ = backward(cache, target)

    def f(w):
        return _loss_through(GnnParams(weights=[w]), sg, g.features, target)

    numeric = kernels.finite_diff_grad(f, params.weights[0].copy())
    assert kernels.relative_error(grad_w[0], numeric) < 1e-5


def test_backward_matches_finite_differences_random_graphs():
    rng = np.random.default_rng(9)
    for trial in range(6):
        n = int(rng.integers(5, 21))
        layers = int(rng.integers(1, 4))
        hidden = int(rng.integers(2, 9))
        dim = int(rng.integers(2, 9))
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)
                 if rng.random() < 0.3]
        labels = np.zeros(n, dtype=np.int64)
        labels[: n // 2] = 1
        g = graph_from_pairs(pairs, rng.normal(size=(n, dim)), labels)
        params = GnnParams.init(dim, hidden, 2, num_layers=layers,
                                seed=int(rng.integers(1000)), use_bias=True)
        sg = full_sample(g)
        target = rng.normal(size=(n, 2))
        z, cache = forward(params, sg, g.features)
        grad_w, grad_b = backward(cache, target)
        for l in range(layers):
            def f_w(w, l=l):
                ws = [u.copy() for u in params.weights]
                ws[l] = w
                return _loss_through(GnnParams(weights=ws, biases=params.biases),
                                     sg, g.features, target)

            numeric = kernels.finite_diff_grad(f_w, params.weights[l].copy())
            assert kernels.relative_error(grad_w[l], numeric) < 1e-5

            def f_b(b, l=l):
                bs = [u.copy() for u in params.biases]
                bs[l] = b.ravel()
                return _loss_through(GnnParams(weights=params.weights, biases=bs),
                                     sg, g.features, target)

            numeric_b = kernels.finite_diff_grad(f_b, params.biases[l].copy().reshape(1, -1))
            assert kernels.relative_error(grad_b[l], numeric_b.ravel()) < 1e-5


def test_node_permutation_equivariance():
    g = generate_synthetic(n=30, k=2, ir=0.5, homophily=0.6, feature_dim=3,
                           class_separation=1.0, seed=5)
    params = GnnParams.init(3, 4, 2, num_layers=2, seed=7)
    z, _ = forward(params, full_sample(g), g.features)

    rng = np.random.default_rng(1)
    perm = rng.permutation(g.num_nodes)
    inv = np.argsort(perm)
    pairs = []
    for u in range(g.num_nodes):
        for v in g.neighbors(u):
            if u < v:
                pairs.append((inv[u], inv[v]))
    g2 = graph_from_pairs(pairs, g.features[perm], g.labels[perm])
    z2, _ = forward(params, full_sample(g2), g2.features)
    assert np.allclose(z2, z[perm], atol=1e-12)


def test_gradient_invariant_to_loss_node_order():
    # permuting which rows carry the upstream gradient permutes nothing
    # about a symmetric mean: summed gradients stay identical
    g = _line_graph(8, feature_dim=3, seed=2)
    params = GnnParams.init(3, 4, 2, num_layers=2, seed=1)
    sg = full_sample(g)
    rng = np.random.default_rng(3)
    target = rng.normal(size=(8, 2))
    _, cache = forward(params, sg, g.features)
    grad_a, _ = backward(cache, target)
    _, cache2 = forward(params, sg, g.features)
    grad_b, _ = backward(cache2, target.copy())
    for ga, gb in zip(grad_a, grad_b):
        assert np.array_equal(ga, gb)


def test_shape_errors():
    g = _line_graph(4)
    params = GnnParams(weights=[np.eye(3)])  # wrong input dim
    with pytest.raises(kernels.ShapeError):
        forward(params, full_sample(g), g.features)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(11)
    tensors = {
        "transform.weight": rng.normal(size=(7, 3)) * 1e-7,
        "gnn.weight0": rng.normal(size=(3, 5)) * 1e9,
        "gnn.weight1": rng.normal(size=(5, 2)),
        "meta.p": np.array([0.47]),
    }
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, tensors)
    back = load_checkpoint(path)
    assert set(back) == set(tensors)
    for name in tensors:
        assert np.array_equal(back[name], np.atleast_2d(tensors[name]))


def test_checkpoint_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("NOT-A-CKPT\n")
    with pytest.raises(ValueError, match="header"):
        load_checkpoint(path)
