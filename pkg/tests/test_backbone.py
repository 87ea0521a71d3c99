"""Two-layer GCN classifier and masked cross entropy."""

import numpy as np
import pytest

from adedgedrop import (ContractError, accuracy, classification_loss,
                        gcn_forward, init_gcn_params, normalize_adjacency)
from adedgedrop import autodiff as ad
from adedgedrop.backbone import glorot_uniform
from conftest import make_er_graph, make_split


def small_setup(rng, n=8, m=5, hidden=6, c=3):
    g = make_er_graph(n, 0.4, rng)
    x = rng.standard_normal((n, m))
    prop = normalize_adjacency(g.adjacency, n)
    params = init_gcn_params(m, hidden, c, rng, prefix="theta")
    return g, x, prop, params


def test_zero_weights_give_zero_logits(rng):
    _, x, prop, params = small_setup(rng)
    params.w1.values[...] = 0.0
    params.w2.values[...] = 0.0
    logits = gcn_forward(None, params, x, prop)
    assert np.array_equal(logits.values, np.zeros_like(logits.values))


def test_identity_propagation_reduces_to_mlp(rng):
    from adedgedrop import identity_csr
    _, x, _, params = small_setup(rng)
    logits = gcn_forward(None, params, x, identity_csr(x.shape[0])).values
    manual = np.maximum(x @ params.w1.values, 0.0) @ params.w2.values
    assert np.allclose(logits, manual, atol=1e-12)


def test_forward_permutation_equivariant(rng):
    _, x, prop, params = small_setup(rng)
    n = x.shape[0]
    perm = rng.permutation(n)
    p_dense = prop.to_dense()[np.ix_(perm, perm)]
    rows, cols = np.nonzero(p_dense)
    from adedgedrop import csr_from_coo
    prop_perm = csr_from_coo((n, n), rows, cols, p_dense[rows, cols])
    base = gcn_forward(None, params, x, prop).values
    permuted = gcn_forward(None, params, x[perm], prop_perm).values
    assert np.allclose(permuted, base[perm], atol=1e-10)


def test_loss_zero_at_confident_correct_prediction():
    labels = make_split(np.array([1, 0]), train=[0], val=[1], test=[],
                        num_classes=2)
    logits = ad.Tensor(np.array([[-40.0, 40.0], [0.0, 0.0]]))
    loss = classification_loss(None, logits, labels)
    assert loss.item() < 1e-9


def test_loss_uniform_logits_is_count_times_log_c():
    labels = make_split(np.array([0, 1, 2, 0]), train=[0, 1, 2], val=[3],
                        test=[], num_classes=3)
    loss = classification_loss(None, ad.Tensor(np.zeros((4, 3))), labels)
    assert loss.item() == pytest.approx(3 * np.log(3), abs=1e-12)


def test_loss_hand_set_probabilities():
    # two classes: logits (0, 0) -> p = 0.5 on the true class;
    # logits (0, ln 3) -> p = 0.25 on class 0.
    labels = make_split(np.array([0, 0, 1]), train=[0, 1], val=[2], test=[],
                        num_classes=2)
    logits = ad.Tensor(np.array([[0.0, 0.0], [0.0, np.log(3.0)], [0.0, 0.0]]))
    loss = classification_loss(None, logits, labels)
    assert loss.item() == pytest.approx(np.log(2) + np.log(4), abs=1e-12)


def test_loss_nonnegative_and_needs_train_nodes(rng):
    labels = make_split(np.array([0, 1, 1]), train=[0, 2], val=[1], test=[],
                        num_classes=2)
    for _ in range(10):
        logits = ad.Tensor(rng.standard_normal((3, 2)) * 5)
        assert classification_loss(None, logits, labels).item() >= 0.0
    empty = make_split(np.array([0, 1, 1]), train=[], val=[0], test=[1],
                       num_classes=2)
    with pytest.raises(ContractError):
        classification_loss(None, ad.Tensor(np.zeros((3, 2))), empty)


def test_gradient_isolation_between_calls(rng):
    """Same loss, fresh tape: grads are bit-identical (determinism)."""
    _, x, prop, params = small_setup(rng)
    labels = make_split(np.array([0, 1, 2, 0, 1, 2, 0, 1]),
                        train=[0, 1, 2, 3], val=[4, 5], test=[6, 7],
                        num_classes=3)
    grads = []
    for _ in range(2):
        tape = ad.Tape()
        loss = classification_loss(
            tape, gcn_forward(tape, params, x, prop), labels)
        ad.backward(tape, loss)
        grads.append((params.w1.grad.copy(), params.w2.grad.copy()))
        ad.zero_grads(params.parameters())
    assert np.array_equal(grads[0][0], grads[1][0])
    assert np.array_equal(grads[0][1], grads[1][1])


def test_accuracy_counting_and_tie_break():
    labels = make_split(np.array([0, 1, 0, 1]), train=[], val=[0, 1, 2, 3],
                        test=[], num_classes=2)
    perfect = np.array([[2.0, 0.0], [0.0, 2.0], [2.0, 0.0], [0.0, 2.0]])
    assert accuracy(perfect, labels, "val") == 1.0
    assert accuracy(-perfect, labels, "val") == 0.0
    three_of_four = perfect.copy()
    three_of_four[3] = [2.0, 0.0]
    assert accuracy(three_of_four, labels, "val") == 0.75

    ties = np.zeros((4, 2))          # argmax tie -> class 0
    assert accuracy(ties, labels, "val") == 0.5
    with pytest.raises(ContractError):
        accuracy(perfect, labels, "test")
    with pytest.raises(ContractError):
        accuracy(perfect, labels, "holdout")


def test_glorot_bounds_and_determinism():
    a = glorot_uniform(np.random.default_rng(3), 20, 30)
    b = glorot_uniform(np.random.default_rng(3), 20, 30)
    assert np.array_equal(a, b)
    bound = np.sqrt(6.0 / 50.0)
    assert np.all(np.abs(a) <= bound)
    params = init_gcn_params(4, 8, 2, np.random.default_rng(0), "p")
    assert params.w1.values.shape == (4, 8)
    assert params.w2.values.shape == (8, 2)


def test_copy_and_load_values_round_trip(rng):
    _, _, _, params = small_setup(rng)
    snapshot = params.copy_values()
    params.w1.values[...] = 0.0
    params.load_values(snapshot)
    assert np.array_equal(params.w1.values, snapshot[0])
    assert np.array_equal(params.w2.values, snapshot[1])
