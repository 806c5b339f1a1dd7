"""Contexts as interventions on one shared state.

An intervention is an action (column-stochastic matrix or unitary) followed
by an outcome decomposition (projectors).  Its branch maps ``K_k = P_k A``
send the shared state to the unnormalized post-outcome state, so
sequential statistics are products of branch maps and order effects come
from their failure to commute.

Stochastic states are probability vectors and their projectors are diagonal
0/1 masks partitioning the state space; amplitude states are complex unit
vectors with orthogonal projectors.  Post-outcome states are renormalized.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bookkeeping import mutual_information

STOCHASTIC = "stochastic"
AMPLITUDE = "amplitude"
TOL = 1e-9


class InterventionError(ValueError):
    pass


@dataclass(frozen=True)
class SharedState:
    kind: str
    vector: np.ndarray

    def __post_init__(self):
        dtype = complex if self.kind == AMPLITUDE else float
        v = np.array(self.vector, dtype=dtype).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        if self.kind == STOCHASTIC:
            if np.any(v < -TOL) or abs(v.sum() - 1.0) > TOL:
                raise InterventionError("stochastic state must be a probability vector")
        elif self.kind == AMPLITUDE:
            if abs(np.linalg.norm(v) - 1.0) > TOL:
                raise InterventionError("amplitude state must have unit norm")
        else:
            raise InterventionError(f"unknown state kind {self.kind!r}")

    @property
    def dimension(self) -> int:
        return self.vector.size

    def weight(self, v: np.ndarray) -> float:
        """Probability carried by an unnormalized post-outcome vector."""
        if self.kind == AMPLITUDE:
            return float(np.vdot(v, v).real)
        return float(v.sum())

    def renormalized(self, v: np.ndarray) -> "SharedState":
        w = self.weight(v)
        return SharedState(self.kind, v / (np.sqrt(w) if self.kind == AMPLITUDE else w))


@dataclass(frozen=True)
class InterventionOp:
    id: str
    kind: str
    action: np.ndarray
    projectors: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        dtype = complex if self.kind == AMPLITUDE else float
        A = np.array(self.action, dtype=dtype)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InterventionError(f"op {self.id!r}: action must be a square matrix")
        d = A.shape[0]
        if self.projectors:
            P = tuple(np.array(p, dtype=dtype) for p in self.projectors)
        elif self.kind == STOCHASTIC:
            # default readout: which basis state the system is in
            P = tuple(np.diag(np.eye(d)[k]).astype(float) for k in range(d))
        else:
            P = (np.eye(d, dtype=complex),)
        for m in (A, *P):
            m.setflags(write=False)
        object.__setattr__(self, "action", A)
        object.__setattr__(self, "projectors", P)
        self._validate()

    def _validate(self):
        A, P, d = self.action, self.projectors, self.dimension
        if any(p.shape != (d, d) for p in P):
            raise InterventionError(f"op {self.id!r}: projector shape mismatch")
        if self.kind == STOCHASTIC:
            if np.any(A < -TOL) or np.max(np.abs(A.sum(axis=0) - 1.0)) > TOL:
                raise InterventionError(f"op {self.id!r}: action is not column-stochastic")
            for p in P:
                off = p - np.diag(np.diag(p))
                if np.any(np.abs(off) > TOL) or np.any(np.abs(np.diag(p) * (1 - np.diag(p))) > TOL):
                    raise InterventionError(f"op {self.id!r}: stochastic projectors must be diagonal 0/1 masks")
        elif self.kind == AMPLITUDE:
            if np.max(np.abs(A.conj().T @ A - np.eye(d))) > TOL:
                raise InterventionError(f"op {self.id!r}: action is not unitary")
            for p in P:
                if np.max(np.abs(p @ p - p)) > TOL or np.max(np.abs(p - p.conj().T)) > TOL:
                    raise InterventionError(f"op {self.id!r}: projectors must be Hermitian idempotents")
            for p, q in itertools.combinations(P, 2):
                if np.max(np.abs(p @ q)) > TOL:
                    raise InterventionError(f"op {self.id!r}: projectors are not mutually orthogonal")
        else:
            raise InterventionError(f"unknown op kind {self.kind!r}")
        if np.max(np.abs(sum(P) - np.eye(d))) > TOL:
            raise InterventionError(f"op {self.id!r}: projectors do not sum to the identity")

    @property
    def dimension(self) -> int:
        return self.action.shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.projectors)

    def branch_maps(self) -> list[np.ndarray]:
        return [p @ self.action for p in self.projectors]


@dataclass(frozen=True)
class InterventionModel:
    initial: SharedState
    ops: Mapping[str, InterventionOp]
    context_prior: Mapping[tuple[str, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        for op in self.ops.values():
            _check_compatible(op, self.initial)

    def op(self, cid: str) -> InterventionOp:
        try:
            return self.ops[cid]
        except KeyError:
            raise InterventionError(f"unknown context {cid!r}") from None


def _check_compatible(op: InterventionOp, x: SharedState | InterventionOp):
    if op.kind != x.kind or op.dimension != x.dimension:
        raise InterventionError(
            f"op {op.id!r} ({op.kind}, dim {op.dimension}) does not match "
            f"{x.kind} object of dimension {x.dimension}"
        )


def apply(op: InterventionOp, x: SharedState, outcome: int | None = None) -> tuple[SharedState, np.ndarray]:
    """Apply an intervention; returns a post state and the outcome distribution.

    Without ``outcome`` the post state is the unconditioned image ``A x``
    (for stochastic ops this is the new state of the system).  With
    ``outcome=k`` it is the renormalized branch ``P_k A x``.
    """
    _check_compatible(op, x)
    v = op.action @ x.vector
    probs = np.array([max(x.weight(K @ x.vector), 0.0) for K in op.branch_maps()])
    if outcome is None:
        return x.renormalized(v), probs
    if not 0 <= outcome < op.n_outcomes:
        raise InterventionError(f"op {op.id!r} has no outcome {outcome}")
    if probs[outcome] <= 1e-15:
        raise InterventionError(f"outcome {outcome} of op {op.id!r} has zero probability")
    return x.renormalized(op.projectors[outcome] @ v), probs


def branch_states(op: InterventionOp, x: SharedState) -> list[SharedState | None]:
    """Renormalized post state for each outcome (``None`` where the probability is zero)."""
    _check_compatible(op, x)
    out = []
    for K in op.branch_maps():
        v = K @ x.vector
        out.append(x.renormalized(v) if x.weight(v) > 1e-15 else None)
    return out


def sequential_stats(m: InterventionModel, order: Sequence[str]) -> np.ndarray:
    """Joint distribution of outcome tuples for interventions applied in ``order``.

    Axis ``i`` of the result indexes the outcome of ``order[i]``.
    """
    ops = [m.op(c) for c in order]
    shape = tuple(op.n_outcomes for op in ops)
    joint = np.zeros(shape)
    x0 = m.initial.vector
    maps = [op.branch_maps() for op in ops]
    for outs in itertools.product(*(range(n) for n in shape)):
        v = x0
        for K, k in zip(maps, outs):
            v = K[k] @ v
        joint[outs] = max(m.initial.weight(v), 0.0)
    return joint


def commutator_norm(a: InterventionOp, b: InterventionOp) -> float:
    """Largest entry of ``K_a K_b - K_b K_a`` over all pairs of branch maps."""
    _check_compatible(a, b)
    worst = 0.0
    for Ka in a.branch_maps():
        for Kb in b.branch_maps():
            worst = max(worst, float(np.max(np.abs(Ka @ Kb - Kb @ Ka))))
    return worst


def _aligned_pair(m: InterventionModel, a: str, b: str) -> tuple[np.ndarray, np.ndarray]:
    ab = sequential_stats(m, [a, b])
    ba = sequential_stats(m, [b, a]).T  # re-index as (outcome of a, outcome of b)
    return ab, ba


def order_effect(m: InterventionModel, a: str, b: str) -> float:
    """Total variation between the a-then-b and b-then-a joints."""
    ab, ba = _aligned_pair(m, a, b)
    return float(min(1.0, 0.5 * np.abs(ab - ba).sum()))


@dataclass
class OrderEffectReport:
    a: str
    b: str
    tv: float
    conditional_tv: float | None  # TV of P(b-outcome | a = yes) across orders
    qq: float | None  # binary question-order statistic; None unless both binary
    joint_ab: np.ndarray
    joint_ba: np.ndarray
    commutator: float

    def to_dict(self) -> dict:
        return {
            "kind": "order-effect",
            "pass": self.tv <= TOL,
            "residuals": {"tv": self.tv, "conditional_tv": self.conditional_tv, "qq": self.qq,
                          "commutator": self.commutator},
            "details": {"a": self.a, "b": self.b,
                        "joint_ab": self.joint_ab.tolist(), "joint_ba_aligned": self.joint_ba.tolist()},
        }


def order_effect_report(m: InterventionModel, a: str, b: str) -> OrderEffectReport:
    """Raw and conditioned order-effect views; neither is treated as primary.

    "Yes" is outcome 0.  ``qq`` is ``[p_ab(y,n) + p_ab(n,y)] - [p_ba(y,n) + p_ba(n,y)]``
    with both joints indexed (a, b).
    """
    ab, ba = _aligned_pair(m, a, b)
    tv = float(min(1.0, 0.5 * np.abs(ab - ba).sum()))
    cond = None
    if ab[0].sum() > 0 and ba[0].sum() > 0:
        cond = float(0.5 * np.abs(ab[0] / ab[0].sum() - ba[0] / ba[0].sum()).sum())
    qq = None
    if ab.shape == (2, 2):
        qq = float((ab[0, 1] + ab[1, 0]) - (ba[0, 1] + ba[1, 0]))
    return OrderEffectReport(a, b, tv, cond, qq, ab, ba, commutator_norm(m.op(a), m.op(b)))


def check_single_state(joint_XC) -> float:
    """I(X;C) in bits for a joint over (state index, context)."""
    return mutual_information(joint_XC)


# --------------------------------------------------------------------------
# construction helpers

def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def qubit_question(cid: str, bloch_angle: float = 0.0) -> InterventionOp:
    """Projective yes/no question along a basis rotated by ``bloch_angle`` on the Bloch sphere.

    The Hilbert-space basis is rotated by half the angle, so a 90 degree Bloch
    rotation gives mutually unbiased questions.
    """
    R = rotation(bloch_angle / 2)
    P = tuple(np.outer(R[:, k], R[:, k].conj()) for k in range(2))
    return InterventionOp(cid, AMPLITUDE, np.eye(2), P)


def _matrix(data, dtype):
    """Matrix from nested lists whose entries are numbers or [re, im] pairs."""
    def entry(v):
        if isinstance(v, (list, tuple)):
            return complex(v[0], v[1])
        return v
    return np.array([[entry(v) for v in row] for row in data], dtype=dtype)


def model_from_dict(doc: dict) -> InterventionModel:
    """Build a model from the JSON layout (``kind``, ``dimension``, ``initial``, ``ops``)."""
    kind = doc["kind"]
    dtype = complex if kind == AMPLITUDE else float
    init = doc["initial"]
    vec = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else v for v in init]
    initial = SharedState(kind, np.array(vec, dtype=dtype))
    if initial.dimension != doc["dimension"]:
        raise InterventionError("initial state does not match declared dimension")
    ops = {}
    for cid, spec in doc["ops"].items():
        proj = tuple(_matrix(p, dtype) for p in spec.get("projectors", []))
        ops[cid] = InterventionOp(cid, kind, _matrix(spec["matrix"], dtype), proj)
    prior = {tuple(k.split(",")): v for k, v in doc.get("context_prior", {}).items()}
    return InterventionModel(initial, ops, prior)


def model_to_dict(m: InterventionModel) -> dict:
    def enc(M):
        if np.iscomplexobj(M):
            return [[[float(v.real), float(v.imag)] for v in row] for row in M]
        return M.tolist()
    init = m.initial.vector
    return {
        "kind": m.initial.kind,
        "dimension": m.initial.dimension,
        "initial": [[float(v.real), float(v.imag)] for v in init] if np.iscomplexobj(init) else init.tolist(),
        "ops": {cid: {"matrix": enc(op.action), "projectors": [enc(p) for p in op.projectors]}
                for cid, op in m.ops.items()},
    }
