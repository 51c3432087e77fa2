import json
import math

import numpy as np
import pytest

from stlcbf import (
    AffinePredicate,
    BallPredicate,
    BarrierTerm,
    CompositeBarrier,
    GammaParams,
    OperatorUnit,
    barrier_from_dict,
    barrier_gradients,
    barrier_state,
    barrier_to_dict,
    barrier_value,
    build_barrier,
    gamma_eval,
    gamma_rate,
    left_limit_state,
    left_limit_value,
    next_switch,
)

from oracles import central_fd


def make_barrier(rng, dim=3, n_aff=4, n_ball=1, eta=12.0, radius=8.0):
    units, params = [], []
    for _ in range(n_aff):
        pred = AffinePredicate(rng.normal(size=dim), float(rng.normal()))
        kind = "always" if rng.uniform() < 0.5 else "eventually"
        a = float(rng.uniform(0.0, 2.0))
        b = float(rng.uniform(a + 0.5, a + 4.0))
        units.append(OperatorUnit(kind, pred, a, b))
    for _ in range(n_ball):
        pred = BallPredicate(rng.normal(size=(2, dim)), rng.normal(size=2), float(rng.uniform(1, 5)))
        units.append(OperatorUnit("always", pred, 0.0, float(rng.uniform(1.0, 5.0))))
    for u in units:
        g0 = float(rng.uniform(-3.0, 0.0))
        gi = g0 + float(rng.uniform(0.5, 2.0))
        dec = float(rng.uniform(0.0, 1.0))
        params.append(GammaParams(g0, gi, dec, u.t_star))
    return build_barrier(units, params, eta=eta, bound_radius=radius)


# --- gamma curves ---------------------------------------------------------


def test_gamma_validation():
    with pytest.raises(ValueError, match="gamma0"):
        GammaParams(1.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="decay"):
        GammaParams(0.0, 1.0, -0.1, 0.0)
    with pytest.raises(ValueError, match="t_star"):
        GammaParams(0.0, 1.0, 0.1, -1.0)


def test_gamma_from_target_reaches_r_exactly():
    g = GammaParams.from_target(-1.0, 2.0, 0.5, 3.0)
    assert abs(gamma_eval(g, 3.0) - 0.5) < 1e-9
    assert g.decay > 0.0


def test_gamma_from_target_flat_when_already_above():
    g = GammaParams.from_target(0.7, 2.0, 0.5, 3.0)
    assert g.decay == 0.0
    assert gamma_eval(g, 100.0) == 0.7


def test_gamma_from_target_errors():
    with pytest.raises(ValueError, match="t_star > 0"):
        GammaParams.from_target(-1.0, 2.0, 0.5, 0.0)
    with pytest.raises(ValueError, match="must exceed r"):
        GammaParams.from_target(-1.0, 0.4, 0.5, 3.0)


def test_gamma_nondecreasing_and_rate():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g0 = float(rng.uniform(-5, 1))
        gi = g0 + float(rng.uniform(0.1, 4))
        r = float(rng.uniform(g0, gi)) if rng.uniform() < 0.5 else g0 - 0.5
        ts = float(rng.uniform(0.5, 5))
        g = GammaParams.from_target(g0, gi, r, ts)
        grid = np.linspace(0.0, 2 * ts, 400)
        vals = [gamma_eval(g, t) for t in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        for t in (0.3, 1.7):
            fd = (gamma_eval(g, t + 1e-6) - gamma_eval(g, t - 1e-6)) / 2e-6
            assert abs(fd - gamma_rate(g, t)) < 1e-5 * (1 + abs(fd))


# --- composite barrier ----------------------------------------------------


def test_term_and_build_validation():
    pred = AffinePredicate(np.array([1.0]), 0.0)
    u = OperatorUnit("always", pred, 1.0, 3.0)
    with pytest.raises(ValueError, match="critical time"):
        BarrierTerm(u, GammaParams(0.0, 1.0, 0.1, 2.0))
    with pytest.raises(ValueError, match="empty unit list"):
        build_barrier([], [], eta=5.0, bound_radius=1.0)
    with pytest.raises(ValueError, match="one GammaParams"):
        build_barrier([u], [], eta=5.0, bound_radius=1.0)
    u2 = OperatorUnit("always", AffinePredicate(np.array([1.0, 2.0]), 0.0), 1.0, 3.0)
    with pytest.raises(ValueError, match="disagree on the state dimension"):
        build_barrier(
            [u, u2],
            [GammaParams(0.0, 1.0, 0.1, 1.0)] * 2,
            eta=5.0,
            bound_radius=1.0,
        )
    with pytest.raises(ValueError, match="deadline must be positive"):
        build_barrier(
            [OperatorUnit("always", pred, 0.0, 0.0)],
            [GammaParams(0.0, 1.0, 0.1, 0.0)],
            eta=5.0,
            bound_radius=1.0,
        )
    with pytest.raises(ValueError, match="eta"):
        CompositeBarrier(
            terms=(BarrierTerm(u, GammaParams(0.0, 1.0, 0.1, 1.0)),),
            eta=0.0, bound_radius=1.0, dim=1,
        )


def test_softmin_under_approximates_min():
    rng = np.random.default_rng(11)
    cb = make_barrier(rng)
    for _ in range(200):
        x = rng.normal(size=cb.dim) * 3
        t = float(rng.uniform(0, 0.9 * min(cb.schedule)))
        st = barrier_state(cb, x, t)
        m = float(np.min(st.term_values))
        assert st.value <= m
        p = len(st.term_values)
        assert m - st.value <= math.log(p) / cb.eta + 1e-12


def test_schedule_activity_and_horizon():
    pred = AffinePredicate(np.array([1.0]), 0.0)
    units = [
        OperatorUnit("always", pred, 0.0, 2.0),
        OperatorUnit("eventually", pred, 1.0, 5.0),
        OperatorUnit("always", pred, 0.5, 2.0),
    ]
    params = [GammaParams(-1.0, 0.5, 0.2, u.t_star) for u in units]
    cb = build_barrier(units, params, eta=10.0, bound_radius=4.0)
    assert cb.schedule == (2.0, 5.0)
    assert cb.horizon == 5.0
    assert list(cb.active_mask(1.0)) == [True, True, True]
    assert list(cb.active_mask(2.0)) == [False, True, False]
    assert list(cb.left_limit_mask(2.0)) == [True, True, True]
    assert next_switch(cb, 0.0) == 2.0
    assert next_switch(cb, 2.0) == 5.0
    assert next_switch(cb, 5.0) == math.inf
    x = np.array([0.3])
    st = barrier_state(cb, x, 3.0)
    assert st.active.tolist() == [1]
    with pytest.raises(ValueError, match="every task term has expired"):
        barrier_value(cb, x, 5.0)
    # left limit at the final deadline is still defined
    assert np.isfinite(left_limit_value(cb, x, 5.0))


def test_switch_monotonicity_spot():
    rng = np.random.default_rng(5)
    cb = make_barrier(rng)
    for s in cb.schedule[:-1]:
        for _ in range(50):
            x = rng.normal(size=cb.dim) * 2
            assert barrier_value(cb, x, s) >= left_limit_value(cb, x, s)


def test_gradients_match_finite_differences_spot():
    rng = np.random.default_rng(9)
    cb = make_barrier(rng)
    for _ in range(20):
        x = rng.normal(size=cb.dim) * 2
        t = float(rng.uniform(0, 0.9 * min(cb.schedule)))
        gx, gt = barrier_gradients(cb, x, t)
        fd_x = central_fd(lambda xx: barrier_value(cb, xx, t), x)
        fd_t = (barrier_value(cb, x, t + 1e-6) - barrier_value(cb, x, t - 1e-6)) / 2e-6
        assert np.all(np.abs(gx - fd_x) < 1e-5 * (1 + np.abs(gx)))
        assert abs(gt - fd_t) < 1e-5 * (1 + abs(gt))


def test_concavity_spot():
    rng = np.random.default_rng(13)
    cb = make_barrier(rng)
    for _ in range(200):
        x1 = rng.normal(size=cb.dim) * 3
        x2 = rng.normal(size=cb.dim) * 3
        t = float(rng.uniform(0, 0.9 * min(cb.schedule)))
        mid = barrier_value(cb, 0.5 * (x1 + x2), t)
        assert mid >= 0.5 * (barrier_value(cb, x1, t) + barrier_value(cb, x2, t)) - 1e-9


def test_bound_term_keeps_superlevel_sets_compact():
    pred = AffinePredicate(np.zeros(2), 5.0)  # constant predicate
    u = OperatorUnit("always", pred, 0.0, 1.0)
    cb = build_barrier([u], [GammaParams(0.0, 1.0, 0.0, 0.0)], eta=10.0, bound_radius=2.0)
    far = np.array([100.0, 0.0])
    assert barrier_value(cb, far, 0.0) < 0.0
    near = np.zeros(2)
    assert barrier_value(cb, near, 0.0) > 0.0


def test_serialization_roundtrip_bitexact():
    rng = np.random.default_rng(21)
    cb = make_barrier(rng)
    doc = json.loads(json.dumps(barrier_to_dict(cb)))
    cb2 = barrier_from_dict(doc)
    for _ in range(50):
        x = rng.normal(size=cb.dim) * 2
        t = float(rng.uniform(0, 0.9 * min(cb.schedule)))
        s1 = barrier_state(cb, x, t)
        s2 = barrier_state(cb2, x, t)
        assert s1.value == s2.value
        assert np.array_equal(s1.grad_x, s2.grad_x)
        assert s1.dbdt == s2.dbdt


def test_weights_sum_to_one():
    rng = np.random.default_rng(17)
    cb = make_barrier(rng)
    x = rng.normal(size=cb.dim)
    st = barrier_state(cb, x, 0.1)
    assert abs(float(np.sum(st.weights)) - 1.0) < 1e-12
    ll = left_limit_state(cb, x, cb.schedule[0])
    assert len(ll.weights) >= len(barrier_state(cb, x, cb.schedule[0]).weights)
