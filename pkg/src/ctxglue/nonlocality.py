"""Bipartite behaviors: no-signalling, local decompositions and CHSH.

Tables are stored as ``p[x, y, a, b] = P(a, b | x, y)``.  Locality is tested
over the deterministic response pairs (``a = f(x)``, ``b = g(y)``); when it
fails the separating functional is returned as a Bell-type inequality.
Outcomes map to +-1 via ``(-1)**outcome`` for correlators.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._lp import EMBEDDABLE, MARGINAL, NON_EMBEDDABLE, hull_check
from .scenario import DEFAULT_TOL, Behavior, chsh_scenario

LOCAL = "local"
NONLOCAL = "nonlocal"
_STATUS = {EMBEDDABLE: LOCAL, NON_EMBEDDABLE: NONLOCAL, MARGINAL: MARGINAL}
MAX_SETTINGS = 3
MAX_OUTCOMES = 3


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class BipartiteBehavior:
    p: np.ndarray  # (X, Y, A, B)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 4:
            raise ShapeError(f"expected p[x, y, a, b], got shape {p.shape}")
        if np.any(p < -1e-12) or np.max(np.abs(p.sum(axis=(2, 3)) - 1.0)) > 1e-9:
            raise ShapeError("every (x, y) table must be a probability distribution")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def settings(self) -> tuple[int, int]:
        return self.p.shape[0], self.p.shape[1]

    @property
    def outcomes(self) -> tuple[int, int]:
        return self.p.shape[2], self.p.shape[3]

    def table(self, x: int, y: int) -> np.ndarray:
        return self.p[x, y]

    @classmethod
    def from_function(cls, f, settings=(2, 2), outcomes=(2, 2)) -> "BipartiteBehavior":
        p = np.zeros((*settings, *outcomes))
        for idx in itertools.product(*(range(n) for n in (*settings, *outcomes))):
            p[idx] = f(*idx)
        return cls(p)

    def to_dict(self) -> dict:
        X, Y = self.settings
        return {
            "settings": [X, Y],
            "outcomes": list(self.outcomes),
            "tables": {f"{x},{y}": self.p[x, y].reshape(-1).tolist() for x in range(X) for y in range(Y)},
        }


def behavior_from_dict(doc: dict) -> BipartiteBehavior:
    X, Y = doc["settings"]
    A, B = doc["outcomes"]
    p = np.zeros((X, Y, A, B))
    for x in range(X):
        for y in range(Y):
            key = f"{x},{y}"
            if key not in doc["tables"]:
                raise ShapeError(f"missing table {key!r}")
            t = np.asarray(doc["tables"][key], dtype=float)
            if t.size != A * B:
                raise ShapeError(f"table {key!r} has {t.size} entries, expected {A * B}")
            p[x, y] = t.reshape(A, B)
    return BipartiteBehavior(p)


BIPARTITE_SCHEMA = {
    "type": "object",
    "required": ["settings", "outcomes", "tables"],
    "properties": {
        "settings": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        "outcomes": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2, "maxItems": 2},
        "tables": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "number", "minimum": 0}}},
    },
}


# --------------------------------------------------------------------------
# standard behaviors

def pr_box() -> BipartiteBehavior:
    """a XOR b = x AND y, uniform marginals."""
    return BipartiteBehavior.from_function(lambda x, y, a, b: 0.5 if (a ^ b) == (x & y) else 0.0)


def correlated_box(E) -> BipartiteBehavior:
    """Binary behavior with uniform marginals and correlators ``E[x][y]``."""
    E = np.asarray(E, dtype=float)
    return BipartiteBehavior.from_function(
        lambda x, y, a, b: (1 + (-1) ** (a ^ b) * E[x, y]) / 4, settings=E.shape
    )


def tsirelson_box() -> BipartiteBehavior:
    """Correlators (+,+,+,-) times 1/sqrt(2): the optimal quantum CHSH behavior."""
    r = math.sqrt(0.5)
    return correlated_box([[r, r], [r, -r]])


def deterministic_behavior(fa, fb, settings=(2, 2), outcomes=(2, 2)) -> BipartiteBehavior:
    return BipartiteBehavior.from_function(
        lambda x, y, a, b: float(a == fa[x] and b == fb[y]), settings, outcomes
    )


def white_noise(settings=(2, 2), outcomes=(2, 2)) -> BipartiteBehavior:
    return BipartiteBehavior(np.full((*settings, *outcomes), 1.0 / math.prod(outcomes)))


# --------------------------------------------------------------------------
# no-signalling

@dataclass
class NoSignallingReport:
    passed: bool
    residual: float
    alice: float  # max over x, a, y, y' of Alice's marginal shift
    bob: float

    def to_dict(self) -> dict:
        return {"kind": "nosignal", "pass": self.passed,
                "residuals": {"max": self.residual, "alice": self.alice, "bob": self.bob}, "details": {}}


def check_no_signalling(b: BipartiteBehavior, tol: float = DEFAULT_TOL) -> NoSignallingReport:
    pa = b.p.sum(axis=3)  # (X, Y, A)
    pb = b.p.sum(axis=2)  # (X, Y, B)
    alice = float(np.max(pa.max(axis=1) - pa.min(axis=1)))
    bob = float(np.max(pb.max(axis=0) - pb.min(axis=0)))
    res = max(alice, bob)
    return NoSignallingReport(res <= tol, res, alice, bob)


# --------------------------------------------------------------------------
# correlators and CHSH

def correlator(b: BipartiteBehavior, x: int, y: int) -> float:
    A, B = b.outcomes
    sign = np.array([[(-1) ** (a ^ bb) for bb in range(B)] for a in range(A)], dtype=float)
    return float((sign * b.p[x, y]).sum())


def chsh_value(b: BipartiteBehavior) -> float:
    """S = E00 + E01 + E10 - E11."""
    if b.settings != (2, 2) or b.outcomes != (2, 2):
        raise ShapeError("CHSH needs two binary settings per party")
    E = lambda x, y: correlator(b, x, y)  # noqa: E731
    return E(0, 0) + E(0, 1) + E(1, 0) - E(1, 1)


def chsh_variants():
    """The eight CHSH functionals as (sign pattern s[x, y], overall sign).

    Each is ``sum_xy s[x,y] E(x,y)`` with exactly one minus sign, or its negation.
    """
    out = []
    for odd in itertools.product(range(2), repeat=2):
        s = np.ones((2, 2))
        s[odd] = -1.0
        for overall in (1.0, -1.0):
            out.append(overall * s)
    return out


def _correlator_coeffs(s: np.ndarray) -> np.ndarray:
    """Cell coefficients (x, y, a, b) of the functional ``sum s[x,y] E(x,y)``."""
    c = np.zeros((2, 2, 2, 2))
    for x, y, a, bb in itertools.product(range(2), repeat=4):
        c[x, y, a, bb] = s[x, y] * (-1) ** (a ^ bb)
    return c


# --------------------------------------------------------------------------
# local decomposition

@dataclass
class LocalModel:
    prior: np.ndarray
    alice: list[tuple[int, ...]]  # a = alice[l][x]
    bob: list[tuple[int, ...]]
    outcomes: tuple[int, int]

    def behavior(self) -> BipartiteBehavior:
        X, Y = len(self.alice[0]), len(self.bob[0])
        p = np.zeros((X, Y, *self.outcomes))
        for w, fa, fb in zip(self.prior, self.alice, self.bob):
            for x in range(X):
                for y in range(Y):
                    p[x, y, fa[x], fb[y]] += w
        return BipartiteBehavior(p)


@dataclass
class BellInequality:
    coefficients: np.ndarray  # same shape as p
    bound: float  # max over local deterministic behaviors
    value: float  # on the tested behavior
    name: str = ""

    @property
    def margin(self) -> float:
        return self.value - self.bound


@dataclass
class LocalityResult:
    status: str
    margin: float  # signed: interior margin (local) or minus separation
    model: LocalModel | None = None
    witness: BellInequality | None = None
    max_residual: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == LOCAL

    def to_dict(self) -> dict:
        w = self.witness
        return {
            "kind": "bell",
            "status": self.status,
            "pass": self.status == LOCAL,
            "residuals": {"margin": self.margin, "model_max_residual": self.max_residual},
            "details": {
                "witness": None if w is None else {
                    "name": w.name, "bound": w.bound, "value": w.value, "violation": w.margin,
                    "coefficients": w.coefficients.tolist(),
                },
                "model": None if self.model is None else {
                    "prior": self.model.prior.tolist(),
                    "alice": [list(a) for a in self.model.alice],
                    "bob": [list(b) for b in self.model.bob],
                },
                **self.extras,
            },
        }


def deterministic_strategies(settings, outcomes):
    X, Y = settings
    A, B = outcomes
    fas = list(itertools.product(range(A), repeat=X))
    fbs = list(itertools.product(range(B), repeat=Y))
    return [(fa, fb) for fa in fas for fb in fbs]


def vertex_matrix(settings, outcomes) -> np.ndarray:
    X, Y = settings
    A, B = outcomes
    strats = deterministic_strategies(settings, outcomes)
    V = np.zeros((len(strats), X * Y * A * B))
    for i, (fa, fb) in enumerate(strats):
        v = np.zeros((X, Y, A, B))
        for x in range(X):
            for y in range(Y):
                v[x, y, fa[x], fb[y]] = 1.0
        V[i] = v.reshape(-1)
    return V


def local_decomposition(b: BipartiteBehavior, tol: float = DEFAULT_TOL) -> LocalityResult:
    """Decompose ``b`` over deterministic local strategies, or return a Bell functional.

    For two binary settings per side the witness is reported as the matching
    CHSH functional whenever one achieves the optimal violation.
    """
    if max(b.settings) > MAX_SETTINGS or max(b.outcomes) > MAX_OUTCOMES:
        raise ShapeError(f"desk caps are {MAX_SETTINGS} settings and {MAX_OUTCOMES} outcomes per party")
    strats = deterministic_strategies(b.settings, b.outcomes)
    V = vertex_matrix(b.settings, b.outcomes)
    p = b.p.reshape(-1)
    res = hull_check(V, p, tol)
    out = LocalityResult(_STATUS[res.status], res.signed_margin)
    if res.weights is not None:
        keep = np.flatnonzero(res.weights > 0)
        model = LocalModel(res.weights[keep] / res.weights[keep].sum(),
                           [strats[i][0] for i in keep], [strats[i][1] for i in keep], b.outcomes)
        out.model = model
        out.max_residual = float(np.max(np.abs(model.behavior().p - b.p)))
    if res.witness is not None:
        out.witness = _canonical_witness(b, V, res.witness, res.witness_bound)
    return out


def _canonical_witness(b, V, w, bound) -> BellInequality:
    p = b.p.reshape(-1)
    gap = float(w @ p - bound)
    if b.settings == (2, 2) and b.outcomes == (2, 2):
        best = None
        for s in chsh_variants():
            c = _correlator_coeffs(s).reshape(-1)
            val, cb = float(c @ p), float(np.max(V @ c))
            if best is None or val - cb > best.margin:
                best = BellInequality(c.reshape(b.p.shape), cb, val, "CHSH")
        if abs(best.margin - gap) <= 1e-7:
            return best
    return BellInequality(w.reshape(b.p.shape), bound, float(w @ p), "lp")


def to_scenario(b: BipartiteBehavior) -> Behavior:
    """Encode as a scenario with observables A_x, B_y and contexts "x,y"."""
    X, Y = b.settings
    if X != Y or b.outcomes[0] != b.outcomes[1]:
        raise ShapeError("scenario encoding needs equal settings and outcomes on both sides")
    s = chsh_scenario(X, b.outcomes[0])
    return Behavior(s, {f"{x},{y}": b.p[x, y].reshape(-1) for x in range(X) for y in range(Y)})
