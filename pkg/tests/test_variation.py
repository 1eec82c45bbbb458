import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aurora_xcon.variation import VariationParams, iso_line_dd, select_uniform


def test_single_member_pairs_are_forced():
    a, b = select_uniform(1, 50, np.random.default_rng(0))
    assert np.all(a == 0) and np.all(b == 0)


def test_selection_frequencies_are_uniform():
    n, draws = 8, 100_000
    a, b = select_uniform(n, draws, np.random.default_rng(1))
    p = 1.0 / n
    tol = 3 * np.sqrt(p * (1 - p) / draws)
    for idx in (a, b):
        freq = np.bincount(idx, minlength=n) / draws
        assert np.all(np.abs(freq - p) < tol)


def test_selection_replay():
    r1 = select_uniform(10, 20, np.random.default_rng(5))
    r2 = select_uniform(10, 20, np.random.default_rng(5))
    np.testing.assert_array_equal(r1[0], r2[0])
    np.testing.assert_array_equal(r1[1], r2[1])


def test_selection_from_empty_fails():
    with pytest.raises(ValueError):
        select_uniform(0, 4, np.random.default_rng(0))


def test_zero_noise_is_identity():
    x1 = np.random.default_rng(0).normal(size=(5, 7))
    x2 = x1 + 1.0
    out = iso_line_dd(x1, x2, VariationParams(0.0, 0.0), np.random.default_rng(1))
    np.testing.assert_array_equal(out, x1)


def test_isotropic_moments():
    x1 = np.zeros((100_000, 3))
    out = iso_line_dd(x1, x1 + 5.0, VariationParams(0.2, 0.0), np.random.default_rng(2))
    assert np.all(np.abs(out.mean(axis=0)) < 0.005)
    np.testing.assert_allclose(out.var(axis=0), 0.04, rtol=0.05)


def test_directional_term_only():
    x1 = np.zeros((100_000, 2))
    x2 = np.tile([1.0, 0.0], (100_000, 1))
    out = iso_line_dd(x1, x2, VariationParams(0.0, 1.0), np.random.default_rng(3))
    assert np.all(out[:, 1] == 0.0)
    assert out[:, 0].var() == pytest.approx(1.0, rel=0.05)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_second_parent_irrelevant_without_line_term(seed, dim):
    rng = np.random.default_rng(seed)
    x1, x2, x3 = rng.normal(size=(3, 4, dim))
    a = iso_line_dd(x1, x2, VariationParams(0.2, 0.0), np.random.default_rng(seed))
    b = iso_line_dd(x1, x3, VariationParams(0.2, 0.0), np.random.default_rng(seed))
    np.testing.assert_array_equal(a, b)
    assert a.shape == x1.shape


def test_single_genotype_and_coincident_parents():
    x = np.arange(4.0)
    out = iso_line_dd(x, x, VariationParams(0.0, 3.0), np.random.default_rng(0))
    np.testing.assert_array_equal(out, x)


def test_shape_mismatch_and_bad_params():
    with pytest.raises(ValueError):
        iso_line_dd(np.zeros(3), np.zeros(4), VariationParams(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        VariationParams(iso_sigma=-1.0)
