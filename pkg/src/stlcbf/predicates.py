"""Concave predicate functions h(x) >= 0 over stacked multi-agent states.

Two concrete forms are supported:

* affine:    h(x) = c . x + d
* quad_ball: h(x) = e - ||A x + b||^2

Both are concave in x, which the barrier composition relies on.  Predicates
are expressed over a stacked state vector whose block structure is described
by a StateLayout (which agent owns which slice).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "StateLayout",
    "AffinePredicate",
    "BallPredicate",
    "Predicate",
    "predicate_to_dict",
    "predicate_from_dict",
]


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class StateLayout:
    """Block layout of a stacked state: agent ids and their block dimensions."""

    ids: tuple[int, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.dims):
            raise ValueError("ids and dims must have equal length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate agent ids in layout")
        if any(d < 1 for d in self.dims):
            raise ValueError("agent dimensions must be >= 1")

    @property
    def dim(self) -> int:
        return int(sum(self.dims))

    def block(self, agent_id: int) -> slice:
        """Slice of the stacked vector owned by agent_id."""
        off = 0
        for aid, d in zip(self.ids, self.dims):
            if aid == agent_id:
                return slice(off, off + d)
            off += d
        raise KeyError(f"agent {agent_id} not in layout")

    def agent_dim(self, agent_id: int) -> int:
        s = self.block(agent_id)
        return s.stop - s.start


@dataclass(frozen=True, eq=False)
class AffinePredicate:
    """h(x) = c . x + d."""

    c: np.ndarray
    d: float
    support: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "c", _readonly(self.c))
        object.__setattr__(self, "d", float(self.d))
        if self.c.ndim != 1:
            raise ValueError("coefficient vector must be 1-D")

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def value(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.d)

    def values(self, X: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over rows of X, shape (m, n) -> (m,)."""
        return X @ self.c + self.d

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.c

    @property
    def h_opt(self) -> float:
        """sup_x h(x): unbounded unless the predicate is constant."""
        if np.any(self.c != 0.0):
            return float("inf")
        return self.d

    def flipped(self) -> "AffinePredicate":
        """Predicate of the negated literal: -h."""
        return AffinePredicate(-self.c, -self.d, self.support)


@dataclass(frozen=True, eq=False)
class BallPredicate:
    """h(x) = e - ||A x + b||^2."""

    A: np.ndarray
    b: np.ndarray
    e: float
    support: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "A", _readonly(np.atleast_2d(self.A)))
        object.__setattr__(self, "b", _readonly(self.b))
        object.__setattr__(self, "e", float(self.e))
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b row counts differ")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def value(self, x: np.ndarray) -> float:
        res = self.A @ x + self.b
        return float(self.e - res @ res)

    def values(self, X: np.ndarray) -> np.ndarray:
        res = X @ self.A.T + self.b
        return self.e - np.einsum("ij,ij->i", res, res)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return -2.0 * (self.A.T @ (self.A @ x + self.b))

    @property
    def h_opt(self) -> float:
        """sup_x h(x) = e, attained where A x + b = 0."""
        return self.e

    def flipped(self):
        raise ValueError("negated ball predicate is convex and not supported")


Predicate = Union[AffinePredicate, BallPredicate]


def infer_support(layout: StateLayout, coeffs: np.ndarray) -> frozenset[int]:
    """Agent ids whose state block carries a nonzero coefficient."""
    coeffs = np.atleast_2d(coeffs)
    out = set()
    for aid in layout.ids:
        if np.any(coeffs[:, layout.block(aid)] != 0.0):
            out.add(aid)
    return frozenset(out)


def predicate_to_dict(p: Predicate) -> dict:
    if isinstance(p, AffinePredicate):
        return {
            "kind": "affine",
            "c": p.c.tolist(),
            "d": p.d,
            "support": sorted(p.support),
        }
    if isinstance(p, BallPredicate):
        return {
            "kind": "quad_ball",
            "A": p.A.tolist(),
            "b": p.b.tolist(),
            "e": p.e,
            "support": sorted(p.support),
        }
    raise TypeError(f"not a predicate: {p!r}")


def predicate_from_dict(d: dict) -> Predicate:
    kind = d["kind"]
    support = frozenset(d.get("support", ()))
    if kind == "affine":
        return AffinePredicate(np.asarray(d["c"], dtype=float), d["d"], support)
    if kind == "quad_ball":
        return BallPredicate(
            np.asarray(d["A"], dtype=float), np.asarray(d["b"], dtype=float), d["e"], support
        )
    raise ValueError(f"unknown predicate kind {kind!r}")
