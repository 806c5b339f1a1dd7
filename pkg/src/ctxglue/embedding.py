"""Global Boolean embedding: does one joint distribution explain every context?

A behavior is embeddable when some distribution over global assignments
(one outcome per observable) reproduces every context table as a marginal.
That is a linear feasibility problem over the deterministic vertices; the
floating-point path uses HiGHS, and :func:`deterministic_hull_membership`
re-decides small instances in exact rational arithmetic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import exact
from ._lp import EMBEDDABLE, MARGINAL, NON_EMBEDDABLE, hull_check
from .scenario import DEFAULT_TOL, Behavior, Scenario, ScenarioError, check_no_disturbance

ASSIGNMENT_CAP = 2 ** 20
ORACLE_MAX_ASSIGNMENTS = 16
ORACLE_MAX_CELLS = 64

__all__ = [
    "EMBEDDABLE", "NON_EMBEDDABLE", "MARGINAL", "SizeCapError", "GlobalAssignment",
    "EmbeddingCertificate", "enumerate_global_assignments", "assignment_matrix",
    "check_boolean_embedding", "deterministic_hull_membership",
]


class SizeCapError(ValueError):
    pass


@dataclass(frozen=True)
class GlobalAssignment:
    values: tuple[tuple[str, int], ...]

    def __getitem__(self, oid: str) -> int:
        for k, v in self.values:
            if k == oid:
                return v
        raise KeyError(oid)

    def as_dict(self) -> dict[str, int]:
        return dict(self.values)

    def label(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self.values)


def enumerate_global_assignments(s: Scenario, cap: int = ASSIGNMENT_CAP) -> list[GlobalAssignment]:
    """All global assignments in lexicographic order (last observable fastest)."""
    total = math.prod(o.arity for o in s.observables)
    if total > cap:
        raise SizeCapError(
            f"{total} global assignments exceed the cap of {cap}; "
            "this scenario is beyond desk scale for vertex enumeration"
        )
    ids = s.observable_ids
    return [
        GlobalAssignment(tuple(zip(ids, combo)))
        for combo in itertools.product(*(range(o.arity) for o in s.observables))
    ]


def cell_index(s: Scenario) -> list[tuple[str, int]]:
    """(context, joint-outcome index) for every behavior cell, in stacking order."""
    return [(c.id, k) for c in s.contexts for k in range(s.table_size(c.id))]


def assignment_matrix(s: Scenario, cap: int = ASSIGNMENT_CAP) -> np.ndarray:
    """0/1 matrix: row per global assignment, column per behavior cell."""
    total = math.prod(o.arity for o in s.observables)
    if total > cap:
        enumerate_global_assignments(s, cap)  # raises with the standard message
    ids = s.observable_ids
    grid = np.indices([o.arity for o in s.observables]).reshape(len(ids), -1).T
    blocks = []
    for c in s.contexts:
        shape = s.shape(c.id)
        cols = [ids.index(o) for o in c.observables]
        flat = np.ravel_multi_index(tuple(grid[:, j] for j in cols), shape) if cols else 0
        block = np.zeros((total, math.prod(shape)))
        block[np.arange(total), flat] = 1.0
        blocks.append(block)
    return np.hstack(blocks)


def stacked_tables(b: Behavior) -> np.ndarray:
    return np.concatenate([b.table(c.id) for c in b.scenario.contexts])


@dataclass
class EmbeddingCertificate:
    status: str
    margin: float  # distance of the behavior from the decision boundary
    feasibility_margin: float  # signed: interior margin if inside, minus separation outside
    joint: dict[GlobalAssignment, float] | None = None
    witness: dict[tuple[str, int], float] | None = None
    witness_value: float | None = None
    witness_bound: float | None = None
    reason: str = ""
    disturbance: float = 0.0
    max_residual: float | None = None  # of the joint against the tables
    extras: dict = field(default_factory=dict)

    @property
    def embeddable(self) -> bool:
        return self.status == EMBEDDABLE

    def to_dict(self) -> dict:
        return {
            "kind": "embed",
            "status": self.status,
            "pass": self.status == EMBEDDABLE,
            "margin": self.margin,
            "feasibility_margin": self.feasibility_margin,
            "joint": None if self.joint is None else [
                {"assignment": a.as_dict(), "weight": w} for a, w in self.joint.items()
            ],
            "witness": None if self.witness is None else {
                "coefficients": [
                    {"context": c, "outcome": k, "coefficient": v} for (c, k), v in self.witness.items()
                ],
                "value": self.witness_value,
                "deterministic_max": self.witness_bound,
            },
            "residuals": {
                "disturbance": self.disturbance,
                "joint_max_residual": self.max_residual,
            },
            "details": {"reason": self.reason},
        }


def _disturbance_witness(b: Behavior, report) -> tuple[dict, float]:
    """Functional that is 0 on every global assignment and equals the residual on b."""
    s = b.scenario
    c1, c2, shared, _ = report.worst

    def shared_marg(cid):
        ctx = s.context(cid)
        idx = [ctx.observables.index(o) for o in shared]
        t = b.tensor(cid)
        drop = tuple(i for i in range(t.ndim) if i not in idx)
        m = t.sum(axis=drop)
        kept = sorted(idx)
        return np.transpose(m, [kept.index(i) for i in idx])
    diff = shared_marg(c1) - shared_marg(c2)
    loc = np.unravel_index(np.argmax(np.abs(diff)), diff.shape)
    sign = 1.0 if diff[loc] >= 0 else -1.0
    coeffs = {}
    for cid, sgn in ((c1, sign), (c2, -sign)):
        ctx = s.context(cid)
        idx = [ctx.observables.index(o) for o in shared]
        for k, out in enumerate(s.outcomes(cid)):
            if tuple(out[i] for i in idx) == tuple(int(x) for x in loc):
                coeffs[(cid, k)] = sgn
    return coeffs, float(abs(diff[loc]))


def check_boolean_embedding(b: Behavior, tol: float = DEFAULT_TOL, cap: int = ASSIGNMENT_CAP) -> EmbeddingCertificate:
    """Decide whether ``b`` is the marginal family of one global joint distribution.

    Returns a certificate with status ``embeddable`` (joint attached),
    ``non-embeddable`` (separating functional attached; its value on ``b``
    exceeds its maximum over global assignments by ``margin``) or
    ``marginal`` when the behavior lies outside the hull by no more than
    ``tol`` so that only a tolerance-relaxed joint exists; whatever candidate
    certificates were found are attached.  Behaviors on a face of the hull
    (for instance sparse mixtures of global assignments) are embeddable
    with ``margin`` 0.
    """
    s = b.scenario
    dist = check_no_disturbance(b, tol)
    if not dist.passed:
        coeffs, value = _disturbance_witness(b, dist)
        return EmbeddingCertificate(
            NON_EMBEDDABLE, value, -value, witness=coeffs, witness_value=value, witness_bound=0.0,
            reason="shared marginals differ between contexts", disturbance=dist.residual,
        )
    assignments = enumerate_global_assignments(s, cap)
    V = assignment_matrix(s, cap)
    p = stacked_tables(b)
    res = hull_check(V, p, tol)
    cells = cell_index(s)
    cert = EmbeddingCertificate(res.status, 0.0, res.signed_margin, disturbance=dist.residual)
    if res.witness is not None:
        cert.witness = {cell: float(v) for cell, v in zip(cells, res.witness) if v != 0}
        cert.witness_bound = res.witness_bound
        cert.witness_value = float(res.witness @ p)
    if res.weights is not None:
        cert.joint = {a: float(w) for a, w in zip(assignments, res.weights) if w > 0}
        cert.max_residual = float(np.max(np.abs(V.T @ res.weights - p)))
    if res.status == NON_EMBEDDABLE:
        cert.margin = res.separation
        cert.reason = "separating functional exceeds every global assignment"
    elif res.status == EMBEDDABLE:
        cert.margin = res.interior
        cert.reason = "joint distribution over global assignments found"
    else:
        cert.margin = abs(res.signed_margin)
        cert.reason = "behavior is outside the hull by at most tol; joint reproduces only within tolerance"
    return cert


def _rational(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10 ** 9)


def deterministic_hull_membership(b: Behavior, exact_tables: Mapping[str, Sequence] | None = None
                                  ) -> tuple[bool, Fraction]:
    """Exact-rational membership of ``b`` in the hull of global assignments.

    ``exact_tables`` (context id -> rationals) gives the behavior exactly;
    otherwise the float tables are rationalized (denominators up to 1e9) and
    each table renormalized exactly, which recovers behaviors built from
    small-denominator rationals but not arbitrary floats.  Returns
    ``(member, margin)`` where the margin is the exact interior margin for
    members and minus the exact L1 distance otherwise.  Intended as a test
    oracle for small scenarios.
    """
    s = b.scenario
    if math.prod(o.arity for o in s.observables) > ORACLE_MAX_ASSIGNMENTS:
        raise SizeCapError(f"oracle handles at most {ORACLE_MAX_ASSIGNMENTS} global assignments")
    V = assignment_matrix(s)
    if V.shape[1] > ORACLE_MAX_CELLS:
        raise SizeCapError(f"oracle handles at most {ORACLE_MAX_CELLS} behavior cells")
    point = []
    for c in s.contexts:
        if exact_tables is not None:
            point.extend(Fraction(x) for x in exact_tables[c.id])
            continue
        t = [_rational(x) for x in b.table(c.id)]
        total = sum(t)
        point.extend(x / total for x in t)
    verts = [[int(x) for x in row] for row in V]
    d, _ = exact.hull_distance_exact(verts, point)
    if d > 0:
        return False, -d
    inner = exact.hull_interior_exact(verts, point)
    return True, inner[0]
