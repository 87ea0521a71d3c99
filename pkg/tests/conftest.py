"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from adedgedrop import Graph, LabelSplit, graph_from_edges


def make_path3() -> Graph:
    return graph_from_edges(3, np.array([[0, 1], [1, 2]]))


def make_triangle() -> Graph:
    return graph_from_edges(3, np.array([[0, 1], [1, 2], [0, 2]]))


def make_star4() -> Graph:
    """Center 0 with leaves 1, 2, 3."""
    return graph_from_edges(4, np.array([[0, 1], [0, 2], [0, 3]]))


def make_er_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    drawn = rng.random(iu.shape[0]) < p
    return graph_from_edges(n, np.stack([iu[drawn], ju[drawn]], axis=1))


def make_connected_graph(n: int, extra: int, seed: int) -> Graph:
    """Ring plus `extra` random chords: connected, at least n edges."""
    rng = np.random.default_rng(seed)
    ring = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    chords = rng.integers(0, n, size=(extra * 3, 2))
    chords = chords[chords[:, 0] != chords[:, 1]][:extra]
    return graph_from_edges(n, np.concatenate([ring, chords]))


def make_split(labels: np.ndarray, train: list[int], val: list[int],
               test: list[int], num_classes: int = 0) -> LabelSplit:
    n = labels.shape[0]

    def mask(idx):
        m = np.zeros(n, dtype=bool)
        m[idx] = True
        return m

    return LabelSplit(labels=labels, train_mask=mask(train),
                      val_mask=mask(val), test_mask=mask(test),
                      num_classes=num_classes)


def central_difference(fn, values: np.ndarray, step: float = 1e-5)\
        -> np.ndarray:
    """Central finite-difference gradient of a scalar fn over `values`.

    Mutates entries of `values` in place (restoring each), so `fn` must
    read the live array."""
    grad = np.zeros_like(values)
    it = np.nditer(values, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = values[idx]
        values[idx] = orig + step
        up = fn()
        values[idx] = orig - step
        down = fn()
        values[idx] = orig
        grad[idx] = (up - down) / (2.0 * step)
    return grad


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray,
                      rel: float = 1e-4, floor: float = 1e-6) -> None:
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    bad = np.abs(analytic - numeric) > rel * scale + floor
    assert not bad.any(), (
        f"{int(bad.sum())} gradient entries off; worst abs diff "
        f"{np.abs(analytic - numeric).max():.3e}")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
