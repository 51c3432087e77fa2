import math

import numpy as np
import pytest

from stlcbf import (
    AffinePredicate,
    AgentModel,
    Always,
    Atom,
    BallPredicate,
    Clique,
    CouplingSpec,
    GammaParams,
    NoiseSpec,
    OperatorUnit,
    Scenario,
    SecondaryControlSpec,
    StateLayout,
    build_barrier,
    coupling_forces,
    log_from_dict,
    log_to_dict,
    read_signal_csv,
    robustness,
    run,
    secondary_controls,
    verify,
    write_log_csv,
)
from stlcbf.sim import sat1


def passive_clique(agent_id=1, dim=2, C=0.0, kappa=1.0, horizon=1.0, name="solo"):
    """Clique whose barrier stays deep in the safe set, so the QP returns 0."""
    lay = StateLayout(ids=(agent_id,), dims=(dim,))
    unit = OperatorUnit("always", AffinePredicate(np.zeros(dim), 5.0), 0.0, horizon)
    cb = build_barrier([unit], [GammaParams(-1.0, 0.5, 0.3, 0.0)], eta=10.0, bound_radius=50.0)
    return Clique(name=name, members=(agent_id,), barrier=cb, layout=lay,
                  coupling_bound=C, kappa=kappa, max_agent_dim=dim)


def passive_scenario(dim=2, x0=None, **kw):
    clique = passive_clique(dim=dim, C=kw.pop("C", 0.0), horizon=kw.pop("horizon_b", 1.0))
    agents = {1: AgentModel(agent_id=1, state_dim=dim, drift=kw.pop("drift", None))}
    if x0 is None:
        x0 = np.ones(dim)
    return Scenario(agents=agents, cliques=(clique,), x0={1: np.asarray(x0, float)}, **kw)


def test_sat1_clips_componentwise():
    out = sat1(np.array([-3.0, -1.0, 0.2, 1.0, 7.0]))
    assert np.array_equal(out, np.array([-1.0, -1.0, 0.2, 1.0, 1.0]))


def test_coupling_forces_formula():
    spec = CouplingSpec(kind="saturating_attraction",
                        attractions={1: ((0.5, 2),), 2: ()})
    states = {1: np.array([0.0, 0.0]), 2: np.array([3.0, -0.25])}
    out = coupling_forces(spec, states, 0.0)
    assert np.allclose(out[1], 0.5 * np.array([1.0, -0.25]))
    assert np.array_equal(out[2], np.zeros(2))
    with pytest.raises(ValueError, match="unknown coupling kind"):
        CouplingSpec(kind="magnet")
    with pytest.raises(ValueError, match="callable"):
        CouplingSpec(kind="scripted")


def test_secondary_controls_formula():
    spec = SecondaryControlSpec(kind="pairwise_repulsion", group=(1, 2), gain=2.0, softening=0.5)
    states = {1: np.array([0.0, 0.0]), 2: np.array([3.0, 4.0])}
    out = secondary_controls(spec, states, 0.0)
    want = 2.0 * np.array([-3.0, -4.0]) / (5.0 + 0.5)
    assert np.allclose(out[1], want)
    assert np.allclose(out[2], -want)
    with pytest.raises(ValueError, match="unknown secondary"):
        SecondaryControlSpec(kind="push")


def test_scenario_validation():
    clique = passive_clique()
    agents = {1: AgentModel(agent_id=1, state_dim=2)}
    with pytest.raises(ValueError, match="dt must be positive"):
        Scenario(agents=agents, cliques=(clique,), x0={1: np.zeros(2)}, dt=0.0)
    with pytest.raises(ValueError, match="missing initial state"):
        Scenario(agents=agents, cliques=(clique,), x0={})
    with pytest.raises(ValueError, match="partition"):
        Scenario(agents={1: agents[1], 2: AgentModel(agent_id=2, state_dim=2)},
                 cliques=(clique,), x0={1: np.zeros(2), 2: np.zeros(2)})


def test_run_rejects_bad_horizon():
    sc = passive_scenario(dt=0.3, horizon=1.0)
    with pytest.raises(ValueError, match="integer multiple"):
        run(sc)


def test_equilibrium_run_stays_put():
    sc = passive_scenario(dt=0.1, x0=[2.0, -1.0])
    log = run(sc)
    assert log.completed
    assert log.times.shape == (11,)
    assert np.array_equal(log.states[1], np.tile([2.0, -1.0], (11, 1)))
    assert np.array_equal(log.inputs[1], np.zeros((10, 2)))
    # u = 0 means the constraint is strictly slack on every step
    assert np.all(log.residuals[1] > 0.0)
    assert np.all(log.barriers["solo"] > 0.0)
    assert np.array_equal(log.disturbance_norms[1], np.zeros(10))
    assert np.array_equal(log.shares[1], np.ones(10))


def test_run_is_deterministic():
    kw = dict(dt=0.02, x0=[1.0, 0.5],
              noise=NoiseSpec(bound=0.1, distribution="uniform_ball", seed=5))
    a = run(passive_scenario(C=0.2, **kw))
    b = run(passive_scenario(C=0.2, **kw))
    assert np.array_equal(a.states[1], b.states[1])
    assert np.array_equal(a.inputs[1], b.inputs[1])
    assert np.array_equal(a.disturbance_norms[1], b.disturbance_norms[1])


def test_uniform_ball_noise_respects_bound():
    sc = passive_scenario(dt=0.01, C=0.25,
                          noise=NoiseSpec(bound=0.25, distribution="uniform_ball", seed=3))
    log = run(sc)
    dn = log.disturbance_norms[1]
    assert np.all(dn <= 0.25 + 1e-12)
    assert np.max(dn) > 0.1  # the sampler actually uses the ball


def test_integrator_is_first_order():
    # rotation drift has an exact solution; forward Euler error should halve
    # with the step size
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    errs = []
    for dt in (0.01, 0.005):
        sc = passive_scenario(dt=dt, x0=[1.0, 0.0], drift=lambda x, t: A @ x)
        log = run(sc)
        exact = np.array([math.cos(1.0), math.sin(1.0)])
        errs.append(float(np.linalg.norm(log.states[1][-1] - exact)))
    ratio = errs[0] / errs[1]
    assert 1.7 < ratio < 2.3


def test_switch_events_logged():
    lay = StateLayout(ids=(1,), dims=(1,))
    units = [
        OperatorUnit("always", AffinePredicate(np.zeros(1), 5.0), 0.0, 0.4),
        OperatorUnit("always", AffinePredicate(np.zeros(1), 6.0), 0.0, 1.0),
    ]
    cb = build_barrier(units, [GammaParams(-1.0, 0.5, 0.3, 0.0)] * 2, eta=10.0, bound_radius=50.0)
    clique = Clique("s", (1,), cb, lay, 0.0, 1.0, 1)
    sc = Scenario(agents={1: AgentModel(agent_id=1, state_dim=1)}, cliques=(clique,),
                  x0={1: np.zeros(1)}, dt=0.1)
    log = run(sc)
    switches = [e for e in log.events if e["kind"] == "switch"]
    assert len(switches) == 1 and "0.4" in switches[0]["detail"]
    assert log.completed and log.times[-1] == 1.0


def test_disturbance_bound_abort():
    spec = CouplingSpec(kind="scripted", scripted=lambda states, t: {1: np.array([3.0, 0.0])})
    sc = passive_scenario(dt=0.1, C=0.5, coupling=spec)
    log = run(sc)
    assert not log.completed
    assert log.events[-1]["kind"] == "disturbance_bound"
    assert "exceeds declared bound" in log.events[-1]["detail"]
    # aborting step is logged, then the run stops
    assert log.times.shape == (2,)
    assert log.inputs[1].shape == (1, 2)
    assert log.disturbance_norms[1][0] == pytest.approx(3.0)


def test_qp_infeasible_abort():
    # ball predicate centered at the agent: zero gradient with a rising funnel
    # leaves the QP no feasible input
    lay = StateLayout(ids=(1,), dims=(2,))
    pred = BallPredicate(np.eye(2), np.zeros(2), 0.25)
    unit = OperatorUnit("always", pred, 0.0, 1.0)
    cb = build_barrier([unit], [GammaParams(0.9, 0.99, 1.0, 0.0)], eta=10.0, bound_radius=50.0)
    clique = Clique("stuck", (1,), cb, lay, 0.0, 1e-3, 2)
    sc = Scenario(agents={1: AgentModel(agent_id=1, state_dim=2)}, cliques=(clique,),
                  x0={1: np.zeros(2)}, dt=0.1)
    log = run(sc)
    assert not log.completed
    assert log.events[-1]["kind"] == "qp_infeasible"
    assert log.times.shape == (1,)
    assert log.inputs[1].shape == (0, 2)


def test_verify_pass_and_floors():
    sc = passive_scenario(dt=0.1, x0=[2.0, -1.0])
    log = run(sc)
    clique = sc.cliques[0]
    formula = Always(0.0, 1.0, Atom(AffinePredicate(np.array([1.0, 0.0]), 0.0)))
    report = verify(log, {"solo": formula}, [clique], {"solo": 0.5})
    assert report["passed"] and report["completed"]
    entry = report["cliques"]["solo"]
    assert entry["rho"] == pytest.approx(2.0)
    assert entry["floor"] == 0.5
    assert entry["max_speed"] == 0.0
    assert entry["barrier_ok"] and entry["rho_ok"] and entry["passed"]
    # an unreachable floor flips rho_ok, a doctored barrier flips barrier_ok
    bad = verify(log, {"solo": formula}, [clique], {"solo": 5.0})
    assert not bad["passed"] and not bad["cliques"]["solo"]["rho_ok"]
    log.barriers["solo"][0] = -1.0
    worse = verify(log, {"solo": formula}, [clique], {"solo": 0.5})
    assert not worse["cliques"]["solo"]["barrier_ok"]


def test_verify_until_floor_uses_lhs_gamma0():
    lay = StateLayout(ids=(1,), dims=(1,))
    lhs = OperatorUnit("always", AffinePredicate(np.zeros(1), 5.0), 0.0, 0.5, until_lhs=True)
    rhs = OperatorUnit("eventually", AffinePredicate(np.zeros(1), 5.0), 0.2, 0.5)
    cb = build_barrier(
        [lhs, rhs],
        [GammaParams(0.2, 1.2, 0.0, 0.0), GammaParams(-1.0, 0.5, 2.0, 0.5)],
        eta=10.0, bound_radius=50.0,
    )
    clique = Clique("u", (1,), cb, lay, 0.0, 1.0, 1)
    sc = Scenario(agents={1: AgentModel(agent_id=1, state_dim=1)}, cliques=(clique,),
                  x0={1: np.array([2.0])}, dt=0.1)
    log = run(sc)
    formula = Always(0.0, 0.5, Atom(AffinePredicate(np.array([1.0]), 0.0)))
    report = verify(log, {"u": formula}, [clique], {"u": 0.9})
    assert report["cliques"]["u"]["floor"] == pytest.approx(0.2)


def test_verify_fails_on_incomplete_log():
    spec = CouplingSpec(kind="scripted", scripted=lambda states, t: {1: np.array([3.0, 0.0])})
    sc = passive_scenario(dt=0.1, C=0.5, coupling=spec)
    log = run(sc)
    clique = sc.cliques[0]
    formula = Always(0.0, 0.1, Atom(AffinePredicate(np.array([1.0, 0.0]), 0.0)))
    report = verify(log, {"solo": formula}, [clique], {"solo": 0.0})
    assert not report["completed"] and not report["passed"]


def test_csv_round_trip_is_exact():
    sc = passive_scenario(dt=0.02, C=0.2, x0=[1.0, 0.5],
                          noise=NoiseSpec(bound=0.1, distribution="uniform_ball", seed=9))
    log = run(sc)
    path = "/tmp/test_sim_log.csv"
    write_log_csv(log, path)
    layout, sig = read_signal_csv(path)
    assert layout == StateLayout(ids=(1,), dims=(2,))
    assert np.array_equal(sig.times, log.times)
    assert np.array_equal(sig.states, log.states[1])
    # the recovered signal monitors identically to the in-memory one
    f = Always(0.0, 1.0, Atom(AffinePredicate(np.array([1.0, 0.0]), 0.0)))
    assert robustness(f, sig) == robustness(f, log.clique_signal(sc.cliques[0]))


def test_read_signal_csv_validation(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="'t' column"):
        read_signal_csv(p)
    p.write_text("t,y1_0\n0.0,1.0\n")
    with pytest.raises(ValueError, match="no x"):
        read_signal_csv(p)
    p.write_text("t,x1_1\n0.0,1.0\n")
    with pytest.raises(ValueError, match="not contiguous"):
        read_signal_csv(p)


def test_log_dict_round_trip():
    sc = passive_scenario(dt=0.1, C=0.2,
                          noise=NoiseSpec(bound=0.1, distribution="uniform_ball", seed=2))
    log = run(sc)
    back = log_from_dict(log_to_dict(log))
    assert np.array_equal(back.times, log.times)
    assert np.array_equal(back.states[1], log.states[1])
    assert np.array_equal(back.inputs[1], log.inputs[1])
    assert np.array_equal(back.barriers["solo"], log.barriers["solo"])
    assert back.completed == log.completed
    assert back.dt == log.dt
    assert back.events == log.events
    assert isinstance(next(iter(back.states)), int)


def test_adversarial_noise_pushes_against_gradient():
    # with an off-center ball term the adversarial sampler must align the
    # disturbance with -grad b
    lay = StateLayout(ids=(1,), dims=(2,))
    pred = BallPredicate(np.eye(2), np.array([-1.0, 0.0]), 4.0)
    unit = OperatorUnit("always", pred, 0.0, 1.0)
    cb = build_barrier([unit], [GammaParams(-2.0, -0.5, 1.0, 0.0)], eta=10.0, bound_radius=50.0)
    clique = Clique("adv", (1,), cb, lay, 0.3, 1.0, 2)
    sc = Scenario(agents={1: AgentModel(agent_id=1, state_dim=2)}, cliques=(clique,),
                  x0={1: np.array([2.0, 0.0])}, dt=0.1,
                  noise=NoiseSpec(bound=0.3, distribution="adversarial", seed=0))
    log = run(sc)
    assert log.completed
    assert np.allclose(log.disturbance_norms[1], 0.3)
    # the barrier still never dips below zero: the QP compensates
    assert np.all(log.barriers["adv"] > 0.0)
