"""Time-varying control barrier functions for temporal task units.

Each operator unit l contributes a term

    b_l(x, t) = -gamma_l(t) + h_l(x)

where gamma_l is a nondecreasing funnel curve reaching the robustness target r
at the unit's critical time t_star (deadline b for eventually, start a for
always).  Active terms (t < deadline) are blended by a softmin

    b(x, t) = -(1/eta) ln( sum_l o_l(t) exp(-eta b_l(x, t)) )

which under-approximates the pointwise min, plus an always-active boundedness
term D - ||x|| keeping the superlevel sets compact.  Terms drop out at their
deadlines, so b is piecewise smooth in t with switches at the sorted unique
deadlines s_1 < ... < s_q; it is undefined at t >= s_q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .formula import OperatorUnit
from .predicates import AffinePredicate, BallPredicate, predicate_to_dict, predicate_from_dict

__all__ = [
    "GammaParams",
    "BarrierTerm",
    "CompositeBarrier",
    "BarrierState",
    "gamma_eval",
    "gamma_rate",
    "build_barrier",
    "barrier_value",
    "barrier_gradients",
    "barrier_state",
    "left_limit_value",
    "left_limit_state",
    "next_switch",
    "barrier_to_dict",
    "barrier_from_dict",
]


@dataclass(frozen=True)
class GammaParams:
    """Funnel curve gamma(t) = (gamma0 - gamma_inf) exp(-decay t) + gamma_inf."""

    gamma0: float
    gamma_inf: float
    decay: float
    t_star: float

    def __post_init__(self):
        if not self.gamma0 < self.gamma_inf:
            raise ValueError(f"gamma0 ({self.gamma0}) must be < gamma_inf ({self.gamma_inf})")
        if self.decay < 0.0:
            raise ValueError("decay must be >= 0")
        if self.t_star < 0.0:
            raise ValueError("t_star must be >= 0")

    @classmethod
    def from_target(cls, gamma0: float, gamma_inf: float, r: float, t_star: float) -> "GammaParams":
        """Pick the decay rate so that gamma(t) >= r for all t >= t_star.

        If gamma0 < r the curve must climb: decay solves gamma(t_star) = r
        exactly.  If gamma0 >= r the curve already starts above the target and
        a flat rate (decay = 0) suffices.
        """
        gamma0 = float(gamma0)
        gamma_inf = float(gamma_inf)
        r = float(r)
        t_star = float(t_star)
        if gamma0 < r:
            if t_star <= 0.0:
                raise ValueError("gamma0 < r requires t_star > 0 to reach the target")
            if not gamma_inf > r:
                raise ValueError(f"gamma_inf ({gamma_inf}) must exceed r ({r}) when gamma0 < r")
            # (r - gamma_inf)/(gamma0 - gamma_inf) in (0, 1) here
            decay = -math.log((r - gamma_inf) / (gamma0 - gamma_inf)) / t_star
        else:
            decay = 0.0
        return cls(gamma0, gamma_inf, decay, t_star)


def gamma_eval(g: GammaParams, t: float) -> float:
    return (g.gamma0 - g.gamma_inf) * math.exp(-g.decay * t) + g.gamma_inf


def gamma_rate(g: GammaParams, t: float) -> float:
    """Time derivative of gamma; nonnegative since gamma0 < gamma_inf."""
    return g.decay * (g.gamma_inf - g.gamma0) * math.exp(-g.decay * t)


@dataclass(frozen=True)
class BarrierTerm:
    unit: OperatorUnit
    gamma: GammaParams

    def __post_init__(self):
        if abs(self.gamma.t_star - self.unit.t_star) > 1e-12:
            raise ValueError(
                f"gamma t_star {self.gamma.t_star} does not match the unit's "
                f"critical time {self.unit.t_star}"
            )

    @property
    def deadline(self) -> float:
        return self.unit.deadline

    def value(self, x: np.ndarray, t: float) -> float:
        return float(self.unit.predicate.value(x)) - gamma_eval(self.gamma, t)


@dataclass(frozen=True, eq=False)
class CompositeBarrier:
    terms: tuple
    eta: float
    bound_radius: float
    dim: int
    smooth_eps: float = 1e-9
    schedule: tuple = field(init=False)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("composite barrier needs at least one term")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.bound_radius < 0.0:
            raise ValueError("bound_radius must be >= 0")
        deadlines = np.array([tm.deadline for tm in self.terms], dtype=float)
        if np.any(deadlines <= 0.0):
            raise ValueError("every unit deadline must be positive")
        object.__setattr__(self, "schedule", tuple(sorted(set(deadlines.tolist()))))
        object.__setattr__(self, "_deadlines", deadlines)
        object.__setattr__(self, "_g0", np.array([tm.gamma.gamma0 for tm in self.terms]))
        object.__setattr__(self, "_gi", np.array([tm.gamma.gamma_inf for tm in self.terms]))
        object.__setattr__(self, "_dec", np.array([tm.gamma.decay for tm in self.terms]))
        aff_idx, ball_idx = [], []
        for i, tm in enumerate(self.terms):
            pred = tm.unit.predicate
            pdim = pred.c.shape[0] if isinstance(pred, AffinePredicate) else pred.A.shape[1]
            if pdim != self.dim:
                raise ValueError("predicate dimension does not match barrier dim")
            (aff_idx if isinstance(pred, AffinePredicate) else ball_idx).append(i)
        object.__setattr__(self, "_aff_idx", np.array(aff_idx, dtype=int))
        object.__setattr__(self, "_ball_idx", np.array(ball_idx, dtype=int))
        if aff_idx:
            object.__setattr__(
                self, "_aff_C", np.stack([self.terms[i].unit.predicate.c for i in aff_idx])
            )
            object.__setattr__(
                self, "_aff_d", np.array([self.terms[i].unit.predicate.d for i in aff_idx])
            )
        object.__setattr__(self, "_mask_cache", {})

    def _mask_info(self, mask: np.ndarray) -> tuple:
        """Index bookkeeping for an activity mask; masks recur between
        switches, so the mapping is cached."""
        key = mask.tobytes()
        info = self._mask_cache.get(key)
        if info is None:
            active = np.flatnonzero(mask)
            if len(self._aff_idx):
                sel = mask[self._aff_idx]
                pos = np.searchsorted(active, self._aff_idx[sel])
            else:
                sel = pos = None
            balls = [
                (int(np.searchsorted(active, i)), int(i)) for i in self._ball_idx if mask[i]
            ]
            info = (active, sel, pos, balls)
            self._mask_cache[key] = info
        return info

    @property
    def horizon(self) -> float:
        return self.schedule[-1]

    def term_values(self, x: np.ndarray, t: float) -> np.ndarray:
        """b_l(x,t) for every task term (ignoring activity)."""
        x = np.asarray(x, dtype=float)
        h = np.empty(len(self.terms))
        if len(self._aff_idx):
            h[self._aff_idx] = self._aff_C @ x + self._aff_d
        for i in self._ball_idx:
            h[i] = self.terms[i].unit.predicate.value(x)
        gam = (self._g0 - self._gi) * np.exp(-self._dec * t) + self._gi
        return h - gam

    def active_mask(self, t: float) -> np.ndarray:
        return self._deadlines > t

    def left_limit_mask(self, s: float) -> np.ndarray:
        """Activity just below s: terms with deadline >= s are still in."""
        return self._deadlines >= s - 1e-12 * max(1.0, abs(s))

    def bound_value(self, x: np.ndarray) -> float:
        nx = math.sqrt(float(np.dot(x, x)) + self.smooth_eps**2)
        return self.bound_radius - nx + self.smooth_eps


@dataclass(frozen=True)
class BarrierState:
    """One-pass evaluation: value, gradients and softmin weights at (x, t)."""

    value: float
    grad_x: np.ndarray
    dbdt: float
    weights: np.ndarray  # over active task terms, bound term last
    active: np.ndarray  # indices of active task terms
    term_values: np.ndarray  # b_l at active task terms, bound term last


def _state(cb: CompositeBarrier, x: np.ndarray, t: float, mask: np.ndarray) -> BarrierState:
    x = np.asarray(x, dtype=float)
    if x.shape != (cb.dim,):
        raise ValueError(f"state must have shape ({cb.dim},)")
    active, sel, pos, balls = cb._mask_info(mask)
    if active.size == 0:
        raise ValueError(
            f"barrier undefined at t={t:g}: every task term has expired "
            f"(final deadline {cb.horizon:g})"
        )
    vals = np.append(cb.term_values(x, t)[active], cb.bound_value(x))
    m = float(np.min(vals))
    w = np.exp(-cb.eta * (vals - m))
    z = float(np.sum(w))
    value = m - math.log(z) / cb.eta
    w /= z
    grad = np.zeros(cb.dim)
    if sel is not None and sel.any():
        grad += cb._aff_C[sel].T @ w[pos]
    for p, i in balls:
        grad += w[p] * cb.terms[i].unit.predicate.gradient(x)
    nx = math.sqrt(float(np.dot(x, x)) + cb.smooth_eps**2)
    grad += w[-1] * (-x / nx)
    rates = cb._dec[active] * (cb._gi[active] - cb._g0[active]) * np.exp(-cb._dec[active] * t)
    dbdt = float(np.dot(w[:-1], -rates))
    return BarrierState(value=value, grad_x=grad, dbdt=dbdt, weights=w, active=active, term_values=vals)


def barrier_state(cb: CompositeBarrier, x: np.ndarray, t: float) -> BarrierState:
    return _state(cb, x, t, cb.active_mask(t))


def barrier_value(cb: CompositeBarrier, x: np.ndarray, t: float) -> float:
    return barrier_state(cb, x, t).value


def barrier_gradients(cb: CompositeBarrier, x: np.ndarray, t: float) -> tuple:
    st = barrier_state(cb, x, t)
    return st.grad_x, st.dbdt


def left_limit_state(cb: CompositeBarrier, x: np.ndarray, s: float) -> BarrierState:
    return _state(cb, x, s, cb.left_limit_mask(s))


def left_limit_value(cb: CompositeBarrier, x: np.ndarray, s: float) -> float:
    """Barrier value in the limit t -> s from below (deadline-s terms kept)."""
    return left_limit_state(cb, x, s).value


def next_switch(cb: CompositeBarrier, t: float) -> float:
    for s in cb.schedule:
        if s - t > 1e-12 * max(1.0, abs(s)):
            return s
    return math.inf


def build_barrier(units, params, eta: float, bound_radius: float, smooth_eps: float = 1e-9) -> CompositeBarrier:
    """Assemble the composite barrier from units and their funnel curves."""
    units = tuple(units)
    params = tuple(params)
    if not units:
        raise ValueError("cannot build a barrier from an empty unit list")
    if len(units) != len(params):
        raise ValueError("one GammaParams required per unit")
    dims = set()
    for u in units:
        pred = u.predicate
        dims.add(pred.c.shape[0] if isinstance(pred, AffinePredicate) else pred.A.shape[1])
    if len(dims) != 1:
        raise ValueError(f"units disagree on the state dimension: {sorted(dims)}")
    terms = tuple(BarrierTerm(unit=u, gamma=g) for u, g in zip(units, params))
    return CompositeBarrier(
        terms=terms, eta=float(eta), bound_radius=float(bound_radius),
        dim=dims.pop(), smooth_eps=float(smooth_eps),
    )


def barrier_to_dict(cb: CompositeBarrier) -> dict:
    return {
        "eta": cb.eta,
        "bound_radius": cb.bound_radius,
        "dim": cb.dim,
        "smooth_eps": cb.smooth_eps,
        "terms": [
            {
                "unit": {
                    "kind": tm.unit.kind,
                    "a": tm.unit.a,
                    "b": tm.unit.b,
                    "until_lhs": tm.unit.until_lhs,
                    "predicate": predicate_to_dict(tm.unit.predicate),
                },
                "gamma": {
                    "gamma0": tm.gamma.gamma0,
                    "gamma_inf": tm.gamma.gamma_inf,
                    "decay": tm.gamma.decay,
                    "t_star": tm.gamma.t_star,
                },
            }
            for tm in cb.terms
        ],
    }


def barrier_from_dict(doc: dict) -> CompositeBarrier:
    units, params = [], []
    for entry in doc["terms"]:
        u = entry["unit"]
        units.append(
            OperatorUnit(
                kind=u["kind"],
                predicate=predicate_from_dict(u["predicate"]),
                a=float(u["a"]),
                b=float(u["b"]),
                until_lhs=bool(u.get("until_lhs", False)),
            )
        )
        g = entry["gamma"]
        params.append(
            GammaParams(
                gamma0=float(g["gamma0"]),
                gamma_inf=float(g["gamma_inf"]),
                decay=float(g["decay"]),
                t_star=float(g["t_star"]),
            )
        )
    return build_barrier(
        units, params, eta=float(doc["eta"]), bound_radius=float(doc["bound_radius"]),
        smooth_eps=float(doc.get("smooth_eps", 1e-9)),
    )
