import numpy as np
import pytest

from stlcbf import AffinePredicate, BallPredicate, StateLayout, infer_support
from stlcbf.predicates import predicate_from_dict, predicate_to_dict


def test_layout_blocks():
    lay = StateLayout(ids=(3, 1, 7), dims=(2, 1, 3))
    assert lay.dim == 6
    assert lay.block(3) == slice(0, 2)
    assert lay.block(1) == slice(2, 3)
    assert lay.block(7) == slice(3, 6)
    assert lay.agent_dim(7) == 3
    with pytest.raises(KeyError):
        lay.block(2)


def test_layout_validation():
    with pytest.raises(ValueError):
        StateLayout(ids=(1, 1), dims=(2, 2))
    with pytest.raises(ValueError):
        StateLayout(ids=(1, 2), dims=(2,))
    with pytest.raises(ValueError):
        StateLayout(ids=(1,), dims=(0,))


def test_affine_value_and_gradient():
    p = AffinePredicate(np.array([2.0, -1.0]), 0.5)
    x = np.array([1.0, 3.0])
    assert p.value(x) == 2.0 * 1.0 - 1.0 * 3.0 + 0.5
    assert np.array_equal(p.gradient(x), np.array([2.0, -1.0]))
    X = np.array([[1.0, 3.0], [0.0, 0.0]])
    assert np.array_equal(p.values(X), np.array([p.value(X[0]), p.value(X[1])]))
    assert p.h_opt == np.inf
    assert AffinePredicate(np.zeros(2), 1.5).h_opt == 1.5


def test_affine_flipped():
    p = AffinePredicate(np.array([1.0, 0.0]), -2.0)
    q = p.flipped()
    x = np.array([0.7, 9.0])
    assert q.value(x) == -p.value(x)


def test_ball_value_gradient_hopt():
    A = np.array([[1.0, 0.0], [0.0, 2.0]])
    b = np.array([-1.0, 0.0])
    p = BallPredicate(A, b, 2.25)
    x = np.array([2.0, 0.5])
    res = A @ x + b
    assert p.value(x) == 2.25 - float(res @ res)
    assert np.allclose(p.gradient(x), -2.0 * A.T @ res)
    assert p.h_opt == 2.25
    with pytest.raises(ValueError, match="convex"):
        p.flipped()


def test_ball_vectorized_matches_scalar_closely():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        k = int(rng.integers(1, 4))
        p = BallPredicate(rng.normal(size=(k, n)), rng.normal(size=k), float(rng.uniform(0, 3)))
        X = rng.normal(size=(20, n))
        vec = p.values(X)
        sca = np.array([p.value(x) for x in X])
        assert np.allclose(vec, sca, rtol=0, atol=1e-12)


def test_affine_vectorized_matches_scalar_closely():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        p = AffinePredicate(rng.normal(size=n), float(rng.normal()))
        X = rng.normal(size=(20, n))
        assert np.allclose(p.values(X), [p.value(x) for x in X], rtol=0, atol=1e-12)


def test_infer_support():
    lay = StateLayout(ids=(1, 2), dims=(2, 2))
    assert infer_support(lay, np.array([1.0, 0.0, 0.0, 0.0])) == frozenset({1})
    assert infer_support(lay, np.array([0.0, 0.0, 0.0, 1.0])) == frozenset({2})
    assert infer_support(lay, np.array([[1.0, 0, 0, 1.0]])) == frozenset({1, 2})
    assert infer_support(lay, np.zeros(4)) == frozenset()


def test_predicate_serialization_roundtrip():
    p = AffinePredicate(np.array([1.5, -0.25]), 3.0, frozenset({1}))
    q = predicate_from_dict(predicate_to_dict(p))
    assert np.array_equal(q.c, p.c) and q.d == p.d and q.support == p.support
    p2 = BallPredicate(np.array([[1.0, 2.0]]), np.array([0.5]), 4.0, frozenset({1, 2}))
    q2 = predicate_from_dict(predicate_to_dict(p2))
    assert np.array_equal(q2.A, p2.A) and np.array_equal(q2.b, p2.b) and q2.e == p2.e
    with pytest.raises(ValueError):
        predicate_from_dict({"kind": "mystery"})
