"""Coupled multi-agent simulation under the decentralized barrier law.

Explicit Euler with zero-order-hold inputs and noise: the closed loop is
discontinuous at activity switches and across softmin weight changes, so a
higher-order smooth integrator would buy nothing; the fixed step keeps the
sample-and-hold control semantics honest.  Everything needed for independent
verification is logged per step against the pre-step state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .controller import Clique, QpInfeasibleError, team_control
from .predicates import StateLayout
from .robustness import SampledSignal, robustness

__all__ = [
    "sat1",
    "CouplingSpec",
    "SecondaryControlSpec",
    "NoiseSpec",
    "Scenario",
    "TrajectoryLog",
    "coupling_forces",
    "secondary_controls",
    "run",
    "verify",
    "write_log_csv",
    "read_signal_csv",
    "log_to_dict",
    "log_from_dict",
]


def sat1(v: np.ndarray) -> np.ndarray:
    """Componentwise saturation to [-1, 1]."""
    return np.clip(np.asarray(v, dtype=float), -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """Uncontrolled coupling c_i(x, t) entering every agent's dynamics.

    saturating_attraction: c_i = sum of gain * sat1(x_target - x_i) over the
    agent's (gain, target) list.
    """

    kind: str = "none"  # none | saturating_attraction | scripted
    attractions: dict = field(default_factory=dict)  # id -> ((gain, target_id), ...)
    scripted: object = None  # callable (states, t) -> dict id -> vector

    def __post_init__(self):
        if self.kind not in ("none", "saturating_attraction", "scripted"):
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        if self.kind == "scripted" and self.scripted is None:
            raise ValueError("scripted coupling needs a callable")


def coupling_forces(spec: CouplingSpec, states: dict, t: float) -> dict:
    if spec.kind == "none":
        return {}
    if spec.kind == "scripted":
        return {i: np.asarray(v, dtype=float) for i, v in spec.scripted(states, t).items()}
    out = {}
    for i, pulls in spec.attractions.items():
        c = np.zeros_like(np.asarray(states[i], dtype=float))
        for gain, target in pulls:
            c = c + gain * sat1(np.asarray(states[target], dtype=float) - states[i])
        out[i] = c
    return out


@dataclass(frozen=True, eq=False)
class SecondaryControlSpec:
    """Additional control objective stacked on top of the QP input.

    pairwise_repulsion: f_u_i = gain * sum over j in the group of
    (x_i - x_j) / (||x_i - x_j|| + softening), for group members i.
    """

    kind: str = "none"  # none | pairwise_repulsion | scripted
    group: tuple = ()
    gain: float = 1.0
    softening: float = 0.01
    scripted: object = None

    def __post_init__(self):
        if self.kind not in ("none", "pairwise_repulsion", "scripted"):
            raise ValueError(f"unknown secondary control kind {self.kind!r}")


def secondary_controls(spec: SecondaryControlSpec, states: dict, t: float) -> dict:
    if spec.kind == "none":
        return {}
    if spec.kind == "scripted":
        return {i: np.asarray(v, dtype=float) for i, v in spec.scripted(states, t).items()}
    out = {}
    for i in spec.group:
        fu = np.zeros_like(np.asarray(states[i], dtype=float))
        for j in spec.group:
            if j == i:
                continue
            diff = np.asarray(states[i], dtype=float) - states[j]
            fu = fu + diff / (float(np.linalg.norm(diff)) + spec.softening)
        out[i] = spec.gain * fu
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Per-agent disturbance w_i with ||w_i|| <= bound, held over each step."""

    bound: float = 0.0
    distribution: str = "uniform_ball"  # uniform_ball | adversarial | none
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in ("uniform_ball", "adversarial", "none"):
            raise ValueError(f"unknown noise distribution {self.distribution!r}")
        if self.bound < 0.0:
            raise ValueError("noise bound must be >= 0")


@dataclass(frozen=True, eq=False)
class Scenario:
    agents: dict  # id -> AgentModel
    cliques: tuple
    x0: dict  # id -> initial state
    dt: float = 0.005
    coupling: CouplingSpec = CouplingSpec()
    secondary: SecondaryControlSpec = SecondaryControlSpec()
    noise: NoiseSpec = NoiseSpec()
    horizon: float | None = None  # defaults to the latest clique deadline

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        for i in self.agents:
            if i not in self.x0:
                raise ValueError(f"missing initial state for agent {i}")
        ids = [i for cl in self.cliques for i in cl.members]
        if sorted(ids) != sorted(self.agents):
            raise ValueError("cliques must partition the agent set")


@dataclass
class TrajectoryLog:
    times: np.ndarray  # (T+1,)
    states: dict  # id -> (T+1, n)
    inputs: dict  # id -> (T, m), applied input (QP + secondary)
    barriers: dict  # clique name -> (T,), nan once the clique expired
    residuals: dict  # id -> (T,), QP constraint slack a'u - rhs
    shares: dict  # id -> (T,)
    disturbance_norms: dict  # id -> (T,), ||c + w (+ g f_u if unplanned)||
    events: list
    completed: bool
    dt: float

    def clique_signal(self, clique: Clique) -> SampledSignal:
        stack = np.concatenate([self.states[i] for i in clique.members], axis=1)
        return SampledSignal(self.times, stack)

    def max_speed(self, members) -> float:
        stack = np.concatenate([self.states[i] for i in members], axis=1)
        if stack.shape[0] < 2:
            return 0.0
        return float(np.max(np.linalg.norm(np.diff(stack, axis=0), axis=1))) / self.dt


def _sample_noise(spec: NoiseSpec, agents: dict, clique_of: dict, tc, rng) -> dict:
    out = {}
    for i, model in agents.items():
        n = model.state_dim
        if spec.bound == 0.0 or spec.distribution == "none":
            out[i] = np.zeros(n)
        elif spec.distribution == "uniform_ball":
            d = rng.normal(size=n)
            nd = float(np.linalg.norm(d))
            d = d / nd if nd > 0 else np.zeros(n)
            out[i] = spec.bound * float(rng.uniform()) ** (1.0 / n) * d
        else:  # adversarial: push straight against the barrier gradient
            cl = clique_of[i]
            st = tc.barrier_states.get(cl.name)
            w = np.zeros(n)
            if st is not None:
                g_i = st.grad_x[cl.block(i)]
                gn = float(np.linalg.norm(g_i))
                if gn > 1e-12:
                    w = -spec.bound * g_i / gn
            out[i] = w
    return out


def run(scenario: Scenario) -> TrajectoryLog:
    sc = scenario
    agent_ids = sorted(sc.agents)
    agents = {i: sc.agents[i] for i in agent_ids}
    horizon = sc.horizon if sc.horizon is not None else max(cl.barrier.horizon for cl in sc.cliques)
    n_steps = int(round(horizon / sc.dt))
    if n_steps < 1 or abs(n_steps * sc.dt - horizon) > 1e-9:
        raise ValueError("horizon must be a positive integer multiple of dt")
    times = np.linspace(0.0, horizon, n_steps + 1)
    clique_of = {i: cl for cl in sc.cliques for i in cl.members}

    x = {i: np.asarray(sc.x0[i], dtype=float).copy() for i in agent_ids}
    states = {i: np.empty((n_steps + 1, agents[i].state_dim)) for i in agent_ids}
    inputs = {i: np.empty((n_steps, agents[i].input_dim)) for i in agent_ids}
    barriers = {cl.name: np.empty(n_steps) for cl in sc.cliques}
    residuals = {i: np.empty(n_steps) for i in agent_ids}
    shares = {i: np.empty(n_steps) for i in agent_ids}
    dist_norms = {i: np.empty(n_steps) for i in agent_ids}
    for i in agent_ids:
        states[i][0] = x[i]
    events = []
    rng = np.random.default_rng(sc.noise.seed)
    switch_times = sorted({s for cl in sc.cliques for s in cl.barrier.schedule})
    next_switch_idx = 0
    completed = True
    steps_done = 0

    for k in range(n_steps):
        t = float(times[k])
        while next_switch_idx < len(switch_times) and switch_times[next_switch_idx] <= t + 1e-12:
            events.append({"t": t, "kind": "switch", "detail": f"activity switch at {switch_times[next_switch_idx]:g}"})
            next_switch_idx += 1
        try:
            tc = team_control(sc.cliques, agents, x, t)
        except QpInfeasibleError as err:
            events.append({"t": t, "kind": "qp_infeasible", "detail": str(err)})
            completed = False
            break
        noise = _sample_noise(sc.noise, agents, clique_of, tc, rng)
        coup = coupling_forces(sc.coupling, x, t)
        sec = secondary_controls(sc.secondary, x, t)
        abort = False
        new_x = {}
        for i in agent_ids:
            model = agents[i]
            u_extra = sec.get(i)
            u = tc.inputs[i] + (u_extra if u_extra is not None else 0.0)
            c = coup.get(i, np.zeros(model.state_dim))
            w = noise[i]
            g = model.g(x[i], t)
            # disturbance the declared bound C must cover: everything the
            # constraint does not model (secondary control counts unless the
            # agent declared it known)
            dist = c + w
            if u_extra is not None and model.known_secondary is None:
                dist = dist + g @ u_extra
            dn = float(np.linalg.norm(dist))
            dist_norms[i][k] = dn
            bound = clique_of[i].coupling_bound
            if dn > bound + 1e-9:
                events.append({
                    "t": t, "kind": "disturbance_bound",
                    "detail": f"agent {i} disturbance {dn:.4f} exceeds declared bound {bound:g}",
                })
                abort = True
            inputs[i][k] = u
            residuals[i][k] = tc.residuals[i]
            shares[i][k] = tc.shares[i]
            new_x[i] = x[i] + sc.dt * (model.f(x[i], t) + g @ u + c + w)
        for cl in sc.cliques:
            barriers[cl.name][k] = tc.barrier_values[cl.name]
        if abort:
            completed = False
            steps_done = k + 1
            for i in agent_ids:
                states[i][k + 1] = new_x[i]
            break
        x = new_x
        for i in agent_ids:
            states[i][k + 1] = x[i]
        steps_done = k + 1

    if completed:
        steps_done = n_steps
    t_len = steps_done
    return TrajectoryLog(
        times=times[: t_len + 1],
        states={i: states[i][: t_len + 1] for i in agent_ids},
        inputs={i: inputs[i][:t_len] for i in agent_ids},
        barriers={n: b[:t_len] for n, b in barriers.items()},
        residuals={i: residuals[i][:t_len] for i in agent_ids},
        shares={i: shares[i][:t_len] for i in agent_ids},
        disturbance_norms={i: dist_norms[i][:t_len] for i in agent_ids},
        events=events,
        completed=completed,
        dt=sc.dt,
    )


def verify(log: TrajectoryLog, formulas: dict, cliques, r_stars: dict, tol_b: float = 1e-3) -> dict:
    """Independent pass/fail check of a finished run.

    Per clique: the minimum logged barrier value must stay above -tol_b, and
    the monitored robustness at t = 0 must reach the guaranteed floor minus a
    sampling slack 2 * dt * max logged speed.  The floor is r_star, except
    that a rebuilt until only pins its left-hand side down to the funnel
    starts: floor = min(r_star, smallest gamma0 among until-lhs terms).
    """
    report = {"completed": log.completed, "cliques": {}, "passed": bool(log.completed)}
    for cl in cliques:
        name = cl.name
        r_star = float(r_stars[name])
        floor = r_star
        lhs_g0 = [tm.gamma.gamma0 for tm in cl.barrier.terms if tm.unit.until_lhs]
        if lhs_g0:
            floor = min(floor, min(lhs_g0))
        sig = log.clique_signal(cl)
        rho = robustness(formulas[name], sig, 0.0)
        speed = log.max_speed(cl.members)
        tol_rho = 2.0 * log.dt * speed
        bvals = log.barriers[name]
        min_b = float(np.nanmin(bvals)) if bvals.size else math.nan
        b_ok = bool(bvals.size) and min_b >= -tol_b
        rho_ok = rho >= floor - tol_rho
        ok = b_ok and rho_ok and log.completed
        report["cliques"][name] = {
            "min_barrier": min_b,
            "rho": rho,
            "r_star": r_star,
            "floor": floor,
            "max_speed": speed,
            "tol_rho": tol_rho,
            "tol_b": tol_b,
            "barrier_ok": b_ok,
            "rho_ok": rho_ok,
            "passed": ok,
        }
        report["passed"] = report["passed"] and ok
    return report


def _csv_columns(log: TrajectoryLog):
    ids = sorted(log.states)
    cols = ["t"]
    for i in ids:
        cols += [f"x{i}_{c}" for c in range(log.states[i].shape[1])]
    for i in ids:
        cols += [f"u{i}_{c}" for c in range(log.inputs[i].shape[1])]
    cols += [f"b_{name}" for name in sorted(log.barriers)]
    for i in ids:
        cols += [f"res_{i}", f"share_{i}", f"dist_{i}"]
    return ids, cols


def write_log_csv(log: TrajectoryLog, path) -> None:
    """One row per step (pre-step state, input, barrier); the final row holds
    the terminal state with step fields left empty."""
    ids, cols = _csv_columns(log)
    t_steps = log.times.shape[0] - 1
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for k in range(t_steps + 1):
            last = k == t_steps
            row = [repr(float(log.times[k]))]
            for i in ids:
                row += [repr(float(v)) for v in log.states[i][k]]
            for i in ids:
                if last:
                    row += [""] * log.inputs[i].shape[1]
                else:
                    row += [repr(float(v)) for v in log.inputs[i][k]]
            for name in sorted(log.barriers):
                row.append("" if last else repr(float(log.barriers[name][k])))
            for i in ids:
                if last:
                    row += [""] * 3
                else:
                    row += [
                        repr(float(log.residuals[i][k])),
                        repr(float(log.shares[i][k])),
                        repr(float(log.disturbance_norms[i][k])),
                    ]
            wr.writerow(row)


def read_signal_csv(path) -> tuple:
    """Read a trajectory CSV back as (layout, SampledSignal).

    Only the t and x{id}_{component} columns are used, so any CSV with that
    header shape works as monitor input.
    """
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [r for r in rd if r]
    try:
        t_col = header.index("t")
    except ValueError:
        raise ValueError("signal CSV needs a 't' column") from None
    state_cols = {}
    for j, name in enumerate(header):
        if name.startswith("x") and "_" in name:
            agent, _, comp = name[1:].partition("_")
            if agent.isdigit() and comp.isdigit():
                state_cols.setdefault(int(agent), {})[int(comp)] = j
    if not state_cols:
        raise ValueError("signal CSV has no x{id}_{component} columns")
    ids = sorted(state_cols)
    dims = []
    for i in ids:
        comps = state_cols[i]
        if sorted(comps) != list(range(len(comps))):
            raise ValueError(f"agent {i} state columns are not contiguous")
        dims.append(len(comps))
    layout = StateLayout(ids=tuple(ids), dims=tuple(dims))
    times = np.array([float(r[t_col]) for r in rows])
    stack = np.empty((len(rows), layout.dim))
    col = 0
    for i in ids:
        for c in range(len(state_cols[i])):
            j = state_cols[i][c]
            stack[:, col] = [float(r[j]) for r in rows]
            col += 1
    return layout, SampledSignal(times, stack)


def log_to_dict(log: TrajectoryLog) -> dict:
    return {
        "dt": log.dt,
        "completed": log.completed,
        "times": log.times.tolist(),
        "states": {str(i): v.tolist() for i, v in log.states.items()},
        "inputs": {str(i): v.tolist() for i, v in log.inputs.items()},
        "barriers": {n: v.tolist() for n, v in log.barriers.items()},
        "residuals": {str(i): v.tolist() for i, v in log.residuals.items()},
        "shares": {str(i): v.tolist() for i, v in log.shares.items()},
        "disturbance_norms": {str(i): v.tolist() for i, v in log.disturbance_norms.items()},
        "events": log.events,
    }


def log_from_dict(doc: dict) -> TrajectoryLog:
    return TrajectoryLog(
        times=np.asarray(doc["times"], dtype=float),
        states={int(i): np.asarray(v, dtype=float) for i, v in doc["states"].items()},
        inputs={int(i): np.asarray(v, dtype=float) for i, v in doc["inputs"].items()},
        barriers={n: np.asarray(v, dtype=float) for n, v in doc["barriers"].items()},
        residuals={int(i): np.asarray(v, dtype=float) for i, v in doc["residuals"].items()},
        shares={int(i): np.asarray(v, dtype=float) for i, v in doc["shares"].items()},
        disturbance_norms={
            int(i): np.asarray(v, dtype=float) for i, v in doc["disturbance_norms"].items()
        },
        events=list(doc.get("events", [])),
        completed=bool(doc["completed"]),
        dt=float(doc["dt"]),
    )
