"""Decentralized min-norm control law enforcing the barrier condition.

Every agent i of clique k solves, at its own state snapshot,

    min  u' u
    s.t. (db/dx_i) g_i u >= ||db/dx_i|| n_hat C
                            - N_i (db/dt + kappa b)
                            - (db/dx_i) f_i [- (db/dx_i) f_u if known]

where N_i splits the time-derivative burden proportionally to gradient-block
norms and n_hat = sqrt(n_bar_k * max agent dimension) inflates the noise
margin so that the per-agent conditions sum to the clique-level barrier
condition under any disturbance with ||c_i|| <= C.  The single-constraint QP
has the closed-form solution u = max(rhs, 0) / ||a||^2 * a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import CompositeBarrier, BarrierState, barrier_state
from .predicates import StateLayout

__all__ = [
    "AgentModel",
    "Clique",
    "QpInfeasibleError",
    "load_share",
    "agent_constraint",
    "solve_agent_qp",
    "team_control",
    "TeamControl",
]

_ZERO_TOL = 1e-12


class QpInfeasibleError(RuntimeError):
    """The half-space constraint has no solution (a ~ 0, rhs > 0)."""

    def __init__(self, message, *, agent_id=None, t=None, rhs=None, barrier_value=None):
        super().__init__(message)
        self.agent_id = agent_id
        self.t = t
        self.rhs = rhs
        self.barrier_value = barrier_value


@dataclass(frozen=True, eq=False)
class AgentModel:
    """Control-affine agent: xdot = f(x,t) + g u + coupling + noise."""

    agent_id: int
    state_dim: int
    input_dim: int | None = None
    drift: object = None  # callable (x, t) -> (n,); None means zero drift
    input_map: np.ndarray | None = None  # constant g, shape (n, m); None = identity
    known_secondary: object = None  # callable (clique stack, t) -> (m,), subtracted in rhs

    def __post_init__(self):
        m = self.input_dim if self.input_dim is not None else self.state_dim
        object.__setattr__(self, "input_dim", m)
        if self.input_map is not None:
            g = np.asarray(self.input_map, dtype=float)
            if g.shape != (self.state_dim, m):
                raise ValueError(f"input map must have shape ({self.state_dim}, {m})")
            if m < self.state_dim:
                raise ValueError("input map cannot have full row rank with m < n")
            smin = float(np.linalg.svd(g, compute_uv=False)[-1])
            if smin <= 1e-9:
                raise ValueError("input map must have full row rank")
            object.__setattr__(self, "input_map", g)

    def f(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.drift is None:
            return np.zeros(self.state_dim)
        return np.asarray(self.drift(x, t), dtype=float)

    def g(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.input_map is None:
            return np.eye(self.state_dim)
        return self.input_map


@dataclass(frozen=True, eq=False)
class Clique:
    """Agent subset jointly responsible for one formula, with its barrier."""

    name: str
    members: tuple
    barrier: CompositeBarrier
    layout: StateLayout
    coupling_bound: float
    kappa: float
    max_agent_dim: int

    def __post_init__(self):
        if tuple(self.layout.ids) != tuple(self.members):
            raise ValueError("layout ids must match the member order")
        if self.layout.dim != self.barrier.dim:
            raise ValueError("layout dimension does not match the barrier")
        if self.coupling_bound < 0.0:
            raise ValueError("coupling bound must be >= 0")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")

    @property
    def n_hat(self) -> float:
        return math.sqrt(self.barrier.dim * self.max_agent_dim)

    def stack(self, states: dict) -> np.ndarray:
        return np.concatenate([np.asarray(states[i], dtype=float) for i in self.members])

    def block(self, i: int) -> slice:
        return self.layout.block(i)


def _share_from_state(clique: Clique, state: BarrierState, i: int) -> float:
    norms = [float(np.linalg.norm(state.grad_x[clique.block(j)])) for j in clique.members]
    den = sum(norms)
    if den <= _ZERO_TOL:
        return 1.0
    return norms[clique.members.index(i)] / den


def load_share(clique: Clique, x_bar: np.ndarray, t: float, i: int) -> float:
    """Fraction of the barrier-condition burden assigned to agent i."""
    if i not in clique.members:
        raise ValueError(f"agent {i} not in clique {clique.name}")
    return _share_from_state(clique, barrier_state(clique.barrier, x_bar, t), i)


def _constraint_from_state(
    clique: Clique, agents: dict, state: BarrierState, x_bar: np.ndarray, t: float, i: int
) -> tuple:
    model = agents[i]
    blk = clique.block(i)
    grad_i = state.grad_x[blk]
    x_i = x_bar[blk]
    share = _share_from_state(clique, state, i)
    g = model.g(x_i, t)
    a = g.T @ grad_i
    rhs = (
        float(np.linalg.norm(grad_i)) * clique.n_hat * clique.coupling_bound
        - share * (state.dbdt + clique.kappa * state.value)
        - float(np.dot(grad_i, model.f(x_i, t)))
    )
    if model.known_secondary is not None:
        fu = np.asarray(model.known_secondary(x_bar, t), dtype=float)
        rhs -= float(np.dot(grad_i, g @ fu))
    return a, rhs


def agent_constraint(clique: Clique, agents: dict, x_bar: np.ndarray, t: float, i: int) -> tuple:
    """Half-space (a, rhs) of agent i's barrier-condition share: a'u >= rhs."""
    if i not in clique.members:
        raise ValueError(f"agent {i} not in clique {clique.name}")
    state = barrier_state(clique.barrier, x_bar, t)
    return _constraint_from_state(clique, agents, state, x_bar, t, i)


def solve_agent_qp(a: np.ndarray, rhs: float) -> np.ndarray:
    """Minimum-norm point of the half-space a'u >= rhs (closed form)."""
    a = np.asarray(a, dtype=float)
    if rhs <= 0.0:
        return np.zeros_like(a)
    nn = float(np.dot(a, a))
    if nn <= _ZERO_TOL**2:
        raise QpInfeasibleError(
            f"constraint direction vanished with rhs = {rhs:g} > 0", rhs=rhs
        )
    return (rhs / nn) * a


@dataclass(frozen=True)
class TeamControl:
    """Inputs plus the per-step diagnostics the trajectory log records."""

    inputs: dict  # agent id -> u
    barrier_values: dict  # clique name -> b
    barrier_states: dict  # clique name -> BarrierState
    residuals: dict  # agent id -> a'u - rhs
    shares: dict  # agent id -> N_i


def team_control(cliques, agents: dict, states: dict, t: float) -> TeamControl:
    """Evaluate every agent's QP at time t from per-agent state snapshots.

    A clique past its final deadline has no remaining obligations; its members
    get zero input from it.
    """
    ids = set()
    for cl in cliques:
        for i in cl.members:
            if i in ids:
                raise ValueError(f"agent {i} appears in two cliques")
            ids.add(i)
    inputs = {}
    bvals = {}
    bstates = {}
    residuals = {}
    shares = {}
    for cl in cliques:
        x_bar = cl.stack(states)
        if t >= cl.barrier.horizon - 1e-12:
            for i in cl.members:
                inputs[i] = np.zeros(agents[i].input_dim)
                residuals[i] = 0.0
                shares[i] = 0.0
            bvals[cl.name] = math.nan
            continue
        state = barrier_state(cl.barrier, x_bar, t)
        bvals[cl.name] = state.value
        bstates[cl.name] = state
        for i in cl.members:
            a, rhs = _constraint_from_state(cl, agents, state, x_bar, t, i)
            try:
                u = solve_agent_qp(a, rhs)
            except QpInfeasibleError as err:
                raise QpInfeasibleError(
                    f"agent {i} infeasible at t = {t:g}: {err} "
                    f"(barrier value {state.value:g})",
                    agent_id=i, t=t, rhs=rhs, barrier_value=state.value,
                ) from None
            inputs[i] = u
            residuals[i] = float(np.dot(a, u)) - rhs
            shares[i] = _share_from_state(cl, state, i)
    for i in agents:
        if i not in inputs:
            inputs[i] = np.zeros(agents[i].input_dim)
            residuals[i] = 0.0
            shares[i] = 0.0
    return TeamControl(
        inputs=inputs, barrier_values=bvals, barrier_states=bstates,
        residuals=residuals, shares=shares,
    )
