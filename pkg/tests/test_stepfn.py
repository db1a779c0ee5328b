import numpy as np
import pytest
from numpy.testing import assert_array_equal

from iterative_isotonic.isotonic import SortedSample
from iterative_isotonic.stepfn import (
    StepFunction,
    evaluate,
    evaluate_batch,
    extend,
    grid_l2_distance,
    jump_count,
    l2_distance,
)


@pytest.fixture
def f():
    return extend(SortedSample([0.2, 0.5, 0.9], [0, 0, 0]), [1.0, 2.0, 3.0])


@pytest.mark.parametrize("x, expected", [(0.0, 1), (0.3, 1), (0.49, 1), (0.5, 2), (0.95, 3), (1.0, 3)])
def test_extension_convention(f, x, expected):
    assert evaluate(f, x) == expected


def test_first_sample_point_belongs_to_first_piece(f):
    assert evaluate(f, 0.2) == 1.0
    assert evaluate(f, 0.1999) == 1.0


def test_single_point_is_constant():
    g = extend(SortedSample([0.4], [7.0]), [7.0])
    assert_array_equal(g([0.0, 0.4, 1.0]), [7, 7, 7])


def test_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        extend(SortedSample([0.2, 0.5], [0, 0]), [1.0])


@pytest.mark.parametrize("x", [-0.1, 1.0000001, np.nan])
def test_out_of_domain(f, x):
    with pytest.raises(ValueError, match="out of domain"):
        evaluate(f, x)


def test_batch_preserves_order(f):
    assert_array_equal(evaluate_batch(f, [0.95, 0.0, 0.5]), [3, 1, 2])


def test_exact_at_sample_points_and_right_continuous():
    rng = np.random.default_rng(0)
    xs = np.sort(rng.uniform(0, 1 - 1e-6, size=50))
    v = rng.normal(size=50)
    g = extend(SortedSample(xs, v), v)
    assert_array_equal(g(xs), v)
    assert_array_equal(g(xs[1:] + 1e-12), v[1:])


def test_l2_examples():
    one = StepFunction([0.0], [1.0])
    zero = StepFunction([0.0], [0.0])
    assert l2_distance(one, one) == 0.0
    assert l2_distance(one, zero) == 1.0
    half = StepFunction([0.0, 0.5], [0.0, 1.0])
    # exact integral 0**2 * .5 + 1**2 * .5
    assert l2_distance(half, zero) == pytest.approx(np.sqrt(0.5), abs=1e-15)
    assert l2_distance(half, zero) ** 2 == pytest.approx(0.5, abs=1e-15)


def test_l2_agrees_with_fine_grid():
    rng = np.random.default_rng(1)
    a = StepFunction(np.r_[0, np.sort(rng.uniform(size=9))], rng.normal(size=10))
    b = StepFunction(np.r_[0, np.sort(rng.uniform(size=14))], rng.normal(size=15))
    d, m = grid_l2_distance(a, b, 200_000)
    assert m == 200_000
    assert l2_distance(a, b) == pytest.approx(d, abs=1e-3)


def test_l2_is_a_metric():
    rng = np.random.default_rng(2)

    def rand_step():
        k = rng.integers(1, 12)
        return StepFunction(np.r_[0, np.sort(rng.uniform(size=k - 1))], rng.normal(size=k))

    for _ in range(100):
        f, g, h = rand_step(), rand_step(), rand_step()
        assert l2_distance(f, g) == pytest.approx(l2_distance(g, f), abs=1e-14)
        assert l2_distance(f, f) == 0.0
        assert l2_distance(f, h) <= l2_distance(f, g) + l2_distance(g, h) + 1e-12


def test_jump_count():
    assert jump_count([1, 1, 2, 2, 3]) == 2
    assert jump_count(StepFunction([0.0, 0.3], [4.0, 4.0])) == 0
    assert jump_count([0.0, 1e-10, 2e-10]) == 0


def test_total_variation():
    g = StepFunction([0.0, 0.2, 0.6], [1.0, -1.0, 0.5])
    assert g.total_variation == pytest.approx(3.5)
