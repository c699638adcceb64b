import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resopt.moea import OPERATORS
from resopt.moea.operators import polynomial_mutation, reflect

LOWER = np.array([-1.0, -1.0, 1e-4, 1e-4])
UPPER = np.ones(4)


@given(st.lists(st.floats(-50, 50), min_size=4, max_size=4))
def test_reflect_stays_in_bounds(x):
    y = reflect(np.array(x), LOWER, UPPER)
    assert np.all(y >= LOWER) and np.all(y <= UPPER)


def test_reflect_mirrors():
    y = reflect(np.array([1.25, -1.5, 0.5, 0.5]), LOWER, UPPER)
    np.testing.assert_allclose(y, [0.75, -0.5, 0.5, 0.5])


def test_reflect_identity_inside():
    x = np.array([0.3, -0.2, 0.4, 0.9])
    assert np.array_equal(reflect(x, LOWER, UPPER), x)


@pytest.mark.parametrize("name", sorted(OPERATORS))
@given(seed=st.integers(0, 2**32 - 1))
def test_operator_output_after_reflection_in_bounds(name, seed):
    rng = np.random.default_rng(seed)
    op = OPERATORS[name]
    parents = rng.uniform(LOWER, UPPER, (op.arity, 4))
    child = reflect(np.asarray(op.apply(parents, LOWER, UPPER, rng), dtype=float), LOWER, UPPER)
    assert child.shape == (4,)
    assert np.all(np.isfinite(child))
    assert np.all(child >= LOWER) and np.all(child <= UPPER)


@pytest.mark.parametrize("name", sorted(OPERATORS))
def test_operator_is_seeded(name):
    op = OPERATORS[name]
    parents = np.random.default_rng(0).uniform(LOWER, UPPER, (op.arity, 4))
    a = op.apply(parents, LOWER, UPPER, np.random.default_rng(5))
    b = op.apply(parents, LOWER, UPPER, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_identical_parents_sbx_returns_parent():
    p = np.array([[0.2, 0.1, 0.5, 0.5]] * 2)
    assert np.array_equal(OPERATORS["sbx"].apply(p, LOWER, UPPER, np.random.default_rng(1)), p[0])


def test_polynomial_mutation_rate_zero_is_identity():
    x = np.array([0.2, 0.1, 0.5, 0.5])
    assert np.array_equal(polynomial_mutation(x, LOWER, UPPER, np.random.default_rng(0), rate=0.0), x)


def test_uniform_mutation_skips_pm():
    assert not OPERATORS["um"].mutate_after
    assert all(OPERATORS[n].mutate_after for n in OPERATORS if n != "um")
