"""Floating-point convex-hull membership with separating functionals.

Given deterministic vertices ``V`` (rows) and a target point ``p``:

* the *separation* is the L1 distance from ``p`` to conv(V); it equals the
  optimum of ``max w.p - max_v w.v`` over ``|w|_inf <= 1``, whose maximizer
  is returned as the witness;
* the *interior margin* is the largest ``t`` such that ``p`` is a convex
  combination of all vertices with every weight ``>= t``.  It is zero exactly
  on the relative boundary of the hull.

The signed feasibility margin is the interior margin for members and minus
the separation otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

EMBEDDABLE = "embeddable"
NON_EMBEDDABLE = "non-embeddable"
MARGINAL = "marginal"

_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass
class HullResult:
    status: str
    separation: float  # >= 0; L1 distance to the hull (up to LP accuracy)
    interior: float | None  # None when p is outside by more than tol
    weights: np.ndarray | None
    witness: np.ndarray | None
    witness_bound: float | None  # max over vertices of witness . v

    @property
    def signed_margin(self) -> float:
        if self.status == NON_EMBEDDABLE or self.interior is None:
            return -self.separation
        return self.interior


def _solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None)):
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                   method="highs", options=_HIGHS)


def separating_functional(V: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Optimal ``|w|_inf <= 1`` functional; returns (w, w.p, max_v w.v)."""
    N, K = V.shape
    # variables [w (K), s]; maximize w.p - s  s.t.  V w - s <= 0
    c = np.concatenate([-p, [1.0]])
    A_ub = np.hstack([V, -np.ones((N, 1))])
    bounds = [(-1.0, 1.0)] * K + [(None, None)]
    res = _solve(c, A_ub, np.zeros(N), bounds=bounds)
    if res.status != 0:
        raise RuntimeError(f"separation LP failed: {res.message}")
    w = res.x[:K]
    w = np.where(np.abs(w) < 1e-12, 0.0, w)
    return w, float(w @ p), float(np.max(V @ w))


def interior_weights(V: np.ndarray, p: np.ndarray, slack: float = 0.0):
    """Maximize the smallest hull weight; ``slack`` relaxes ``V^T w = p`` per cell."""
    N, K = V.shape
    # w = nu + t, nu >= 0, t >= 0 ; maximize t
    Vt = V.T
    col = Vt.sum(axis=1, keepdims=True)
    c = np.zeros(N + 1)
    c[-1] = -1.0
    A_eq = np.vstack([np.hstack([np.ones((1, N)), [[float(N)]]])])
    b_eq = np.array([1.0])
    M = np.hstack([Vt, col])
    if slack > 0:
        A_ub = np.vstack([M, -M])
        b_ub = np.concatenate([p + slack, -(p - slack)])
        res = _solve(c, A_ub, b_ub, A_eq, b_eq)
    else:
        res = _solve(c, A_eq=np.vstack([M, A_eq]), b_eq=np.concatenate([p, b_eq]))
    if res.status != 0:
        return None
    t = float(res.x[-1])
    w = res.x[:N] + t
    return t, _polish(V, p, w)


def _polish(V: np.ndarray, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Remove solver-level residual from ``V^T w = p`` without leaving the simplex."""
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    A = np.vstack([V.T, np.ones(len(w))])
    rhs = np.concatenate([p, [1.0]])
    support = w > 1e-12
    delta, *_ = np.linalg.lstsq(A[:, support], rhs - A @ w, rcond=None)
    cand = w.copy()
    cand[support] += delta
    if np.all(cand >= 0) and np.max(np.abs(A @ cand - rhs)) <= np.max(np.abs(A @ w - rhs)):
        return cand
    return w


def hull_check(V: np.ndarray, p: np.ndarray, tol: float) -> HullResult:
    """Three-way hull membership decided by checked certificates.

    * non-embeddable: the separating functional beats every vertex by more than ``tol``;
    * embeddable: an exact-equality decomposition exists and, after polishing,
      reproduces ``p`` within ``tol`` (points on faces of the hull qualify,
      with interior margin 0);
    * marginal: neither — ``p`` is outside by at most ``tol`` and only a
      tolerance-relaxed decomposition exists.
    """
    V = np.asarray(V, dtype=float)
    p = np.asarray(p, dtype=float)
    w, val, bound = separating_functional(V, p)
    gap = val - bound
    if gap > tol:
        return HullResult(NON_EMBEDDABLE, gap, None, None, w, bound)
    witness = (w, bound) if gap > 0 and np.any(w) else (None, None)
    inner = interior_weights(V, p)
    if inner is not None:
        t, weights = inner
        if np.max(np.abs(V.T @ weights - p)) <= tol:
            return HullResult(EMBEDDABLE, max(gap, 0.0), t if t > 0 else 0.0, weights, *witness)
    relaxed = interior_weights(V, p, slack=tol)
    weights = None if relaxed is None else relaxed[1]
    return HullResult(MARGINAL, max(gap, 0.0), None, weights, *witness)
