import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aurora_xcon.core import (
    RngStream,
    SolutionBatch,
    euclidean_distance,
    pairwise_distances,
    subsample_indices,
    subsample_trajectory,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_distance_identity_and_345():
    assert euclidean_distance([0, 0], [0, 0]) == 0.0
    assert euclidean_distance([0, 0], [3, 4]) == 5.0


def test_distance_matches_scalar_loop():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=10), rng.normal(size=10)
    acc = 0.0
    for x, y in zip(a, b):
        acc += (x - y) ** 2
    assert euclidean_distance(a, b) == pytest.approx(math.sqrt(acc), rel=1e-12)


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        euclidean_distance([0, 0], [0, 0, 0])


@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite), arrays(float, 4, elements=finite))
def test_distance_metric_axioms(a, b, c):
    ab, bc, ac = euclidean_distance(a, b), euclidean_distance(b, c), euclidean_distance(a, c)
    assert ab == euclidean_distance(b, a)
    assert ab >= 0
    assert ac <= ab + bc + 1e-9 * (1 + ab + bc)


def test_pairwise_matches_scalar_distance():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 3))
    d = pairwise_distances(x)
    for i in range(6):
        for j in range(6):
            assert d[i, j] == pytest.approx(euclidean_distance(x[i], x[j]), abs=1e-12)
    x[1] = x[0]
    assert pairwise_distances(x)[0, 1] == 0.0


def test_subsample_kheperax_shape():
    full = np.arange(200 * 5, dtype=float).reshape(200, 5)
    out = subsample_trajectory(full, 50)
    assert out.shape == (50, 5)
    np.testing.assert_array_equal(out[0], full[0])
    np.testing.assert_array_equal(out[-1], full[199])


def test_subsample_identity_and_small_case():
    full = np.random.default_rng(0).normal(size=(7, 2))
    np.testing.assert_array_equal(subsample_trajectory(full, 7), full)
    np.testing.assert_array_equal(subsample_indices(5, 3), [0, 2, 4])


def test_subsample_rejects_upsampling():
    with pytest.raises(ValueError):
        subsample_indices(3, 5)


@given(st.integers(1, 400), st.data())
def test_subsample_strictly_increasing(t_full, data):
    t_s = data.draw(st.integers(1, t_full))
    idx = subsample_indices(t_full, t_s)
    assert len(idx) == t_s
    assert idx[0] == 0
    assert np.all(np.diff(idx) > 0)
    if t_s > 1:
        assert idx[-1] == t_full - 1


def test_rng_stream_replay():
    a = RngStream(42, 3).generator().normal(size=5)
    b = RngStream(42, 3).generator().normal(size=5)
    c = RngStream(42, 4).generator().normal(size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_solution_batch_roundtrip():
    b = SolutionBatch(np.ones((3, 2)), np.array([1.0, 2.0, 3.0]), np.zeros((3, 4)), np.zeros((3, 5, 2)))
    assert len(b) == 3
    assert b[1].fitness == 2.0
    assert len(b.take([0, 2])) == 2
    with pytest.raises(ValueError):
        SolutionBatch(np.ones((2, 2)), np.zeros(3), np.zeros((3, 1)), np.zeros((3, 1, 1)))
    with pytest.raises(ValueError):
        SolutionBatch.concat(b, SolutionBatch(np.ones((1, 2)), np.zeros(1), np.zeros((1, 3)), np.zeros((1, 5, 2))))
