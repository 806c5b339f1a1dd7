"""Scenarios, behaviors, marginals and the no-disturbance check.

A scenario is a set of observables (finite outcome sets) and a list of
contexts, each an ordered tuple of observables that are realized together.
A behavior attaches one outcome distribution to every context.  Tables are
flat arrays indexed row-major over the context's observable order, so the
outcome of the *last* observable varies fastest.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import jsonschema
import numpy as np

from ._io import atomic_write_text, to_jsonable

DEFAULT_TOL = 1e-9


class ScenarioError(ValueError):
    """Raised for malformed scenario files or invalid operation arguments.

    ``path`` names the offending field (``"tables.c1[2]"``) and ``line`` the
    source line for JSON syntax errors, when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = []
        if path:
            where.append(f"at {path}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


@dataclass(frozen=True)
class Observable:
    id: str
    arity: int


@dataclass(frozen=True)
class Context:
    id: str
    observables: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))


@dataclass(frozen=True)
class Scenario:
    observables: tuple[Observable, ...]
    contexts: tuple[Context, ...]

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "contexts", tuple(self.contexts))

    @property
    def arities(self) -> dict[str, int]:
        return {o.id: o.arity for o in self.observables}

    @property
    def observable_ids(self) -> list[str]:
        return [o.id for o in self.observables]

    @property
    def context_ids(self) -> list[str]:
        return [c.id for c in self.contexts]

    def context(self, cid: str) -> Context:
        for c in self.contexts:
            if c.id == cid:
                return c
        raise ScenarioError(f"unknown context {cid!r}")

    def shape(self, cid: str) -> tuple[int, ...]:
        ar = self.arities
        return tuple(ar[o] for o in self.context(cid).observables)

    def table_size(self, cid: str) -> int:
        return math.prod(self.shape(cid))

    def outcomes(self, cid: str) -> list[tuple[int, ...]]:
        """Joint outcomes of a context in table order."""
        return list(itertools.product(*(range(n) for n in self.shape(cid))))


@dataclass(frozen=True)
class Violation:
    location: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, location: str, message: str) -> None:
        self.violations.append(Violation(location, message))

    def to_dict(self) -> dict:
        return {
            "kind": "validate",
            "pass": self.ok,
            "residuals": {"violations": len(self.violations)},
            "details": [{"location": v.location, "message": v.message} for v in self.violations],
        }


class Behavior:
    """Per-context outcome distributions for a scenario.

    Tables are stored as read-only float64 arrays; construction does not
    validate (use :func:`validate_behavior`) so that broken inputs can still
    be inspected and reported on.
    """

    __slots__ = ("scenario", "tables")

    def __init__(self, scenario: Scenario, tables: Mapping[str, Sequence[float]]):
        self.scenario = scenario
        frozen = {}
        for cid, t in tables.items():
            arr = np.array(t, dtype=float).reshape(-1)
            arr.setflags(write=False)
            frozen[cid] = arr
        self.tables: dict[str, np.ndarray] = frozen

    def table(self, cid: str) -> np.ndarray:
        if cid not in self.tables:
            raise ScenarioError(f"unknown context {cid!r}")
        return self.tables[cid]

    def tensor(self, cid: str) -> np.ndarray:
        """The table of ``cid`` reshaped to one axis per observable."""
        return self.table(cid).reshape(self.scenario.shape(cid))

    def __eq__(self, other):
        if not isinstance(other, Behavior):
            return NotImplemented
        return (
            self.scenario == other.scenario
            and self.tables.keys() == other.tables.keys()
            and all(np.array_equal(self.tables[k], other.tables[k]) for k in self.tables)
        )

    def __repr__(self):
        return f"Behavior(contexts={list(self.tables)})"


def validate_scenario(s: Scenario) -> ValidationReport:
    report = ValidationReport()
    seen: set[str] = set()
    for i, o in enumerate(s.observables):
        loc = f"observables[{i}]"
        if not isinstance(o.id, str) or not o.id:
            report.add(loc, "observable id must be a non-empty string")
        if o.id in seen:
            report.add(loc, f"duplicate observable id {o.id!r}")
        seen.add(o.id)
        if not isinstance(o.arity, (int, np.integer)) or isinstance(o.arity, bool) or o.arity < 2:
            report.add(loc, f"observable {o.id!r} has arity {o.arity!r}; need an integer >= 2")
    if not s.contexts:
        report.add("contexts", "scenario has no contexts")
    cids: set[str] = set()
    for i, c in enumerate(s.contexts):
        loc = f"contexts[{i}]"
        if c.id in cids:
            report.add(loc, f"duplicate context id {c.id!r}")
        cids.add(c.id)
        if not c.observables:
            report.add(loc, f"context {c.id!r} is empty")
        if len(set(c.observables)) != len(c.observables):
            dup = sorted({x for x in c.observables if c.observables.count(x) > 1})
            report.add(loc, f"context {c.id!r} repeats observable(s) {dup}")
        for j, oid in enumerate(c.observables):
            if oid not in seen:
                report.add(f"{loc}.observables[{j}]", f"context {c.id!r} references unknown observable {oid!r}")
    return report


def validate_behavior(b: Behavior, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Scenario checks plus table presence, length, sign and normalization."""
    report = validate_scenario(b.scenario)
    if not report.ok:
        return report
    for c in b.scenario.contexts:
        loc = f"tables.{c.id}"
        if c.id not in b.tables:
            report.add(loc, f"context {c.id!r} has no table")
            continue
        t = b.tables[c.id]
        n = b.scenario.table_size(c.id)
        if t.size != n:
            report.add(loc, f"table has {t.size} entries, expected {n}")
            continue
        if not np.all(np.isfinite(t)):
            report.add(loc, "table has non-finite entries")
            continue
        for k in np.flatnonzero(t < 0):
            report.add(f"{loc}[{k}]", f"negative weight {float(t[k])!r}")
        if abs(t.sum() - 1.0) > tol:
            report.add(loc, f"weights sum to {float(t.sum())!r}, not 1")
    for cid in b.tables:
        if cid not in b.scenario.context_ids:
            report.add(f"tables.{cid}", f"table for unknown context {cid!r}")
    return report


def marginal(b: Behavior, c: str, keep: Iterable[str]) -> np.ndarray:
    """Marginal of context ``c`` onto the observables in ``keep``.

    The result is flattened in the context's own observable order restricted
    to ``keep`` (not the order ``keep`` was given in), so keeping every
    observable returns the table unchanged.
    """
    ctx = b.scenario.context(c)
    keep = set(keep)
    if not keep:
        raise ScenarioError("keep must be non-empty")
    extra = keep - set(ctx.observables)
    if extra:
        raise ScenarioError(f"{sorted(extra)} not in context {c!r}")
    axes = tuple(i for i, o in enumerate(ctx.observables) if o not in keep)
    return b.tensor(c).sum(axis=axes).reshape(-1)


def _marginal_in_order(b: Behavior, c: str, obs: Sequence[str]) -> np.ndarray:
    ctx = b.scenario.context(c)
    idx = [ctx.observables.index(o) for o in obs]
    drop = tuple(i for i in range(len(ctx.observables)) if i not in idx)
    m = b.tensor(c).sum(axis=drop)
    # remaining axes are in context order; permute to ``obs`` order
    kept = sorted(idx)
    return np.transpose(m, [kept.index(i) for i in idx]).reshape(-1)


@dataclass
class DisturbanceReport:
    passed: bool
    residual: float
    tol: float
    # (context_a, context_b, shared observables, max abs marginal difference)
    pairs: list[tuple[str, str, tuple[str, ...], float]] = field(default_factory=list)

    @property
    def worst(self):
        return max(self.pairs, key=lambda p: p[3]) if self.pairs else None

    def to_dict(self) -> dict:
        return {
            "kind": "no-disturbance",
            "pass": self.passed,
            "residuals": {"max": self.residual},
            "details": [
                {"contexts": [a, b], "shared": list(sh), "residual": r} for a, b, sh, r in self.pairs
            ],
        }


def check_no_disturbance(b: Behavior, tol: float = DEFAULT_TOL) -> DisturbanceReport:
    """Compare the marginals two contexts induce on the observables they share."""
    ctxs = b.scenario.contexts
    pairs = []
    for c1, c2 in itertools.combinations(ctxs, 2):
        shared = tuple(o for o in c1.observables if o in c2.observables)
        if not shared:
            continue
        m1 = _marginal_in_order(b, c1.id, shared)
        m2 = _marginal_in_order(b, c2.id, shared)
        pairs.append((c1.id, c2.id, shared, float(np.max(np.abs(m1 - m2)))))
    residual = max((p[3] for p in pairs), default=0.0)
    return DisturbanceReport(residual <= tol, residual, tol, pairs)


def behavior_from_joint(s: Scenario, joint: np.ndarray) -> Behavior:
    """Marginalize a joint distribution over all observables (scenario order)."""
    joint = np.asarray(joint, dtype=float).reshape([o.arity for o in s.observables])
    ids = s.observable_ids
    tables = {}
    for c in s.contexts:
        idx = [ids.index(o) for o in c.observables]
        drop = tuple(i for i in range(len(ids)) if i not in idx)
        m = joint.sum(axis=drop)
        kept = sorted(idx)
        tables[c.id] = np.transpose(m, [kept.index(i) for i in idx]).reshape(-1)
    return Behavior(s, tables)


# --------------------------------------------------------------------------
# file format

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["observables", "contexts", "tables"],
    "properties": {
        "observables": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "arity"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "arity": {"type": "integer", "minimum": 2},
                },
            },
        },
        "contexts": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "observables"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "observables": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                },
            },
        },
        "tables": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "number", "minimum": 0}},
        },
    },
}


def _json_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def read_json(path, schema: dict | None = None):
    """Load a JSON document, mapping syntax and schema failures to ScenarioError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"JSON parse error: {e.msg}", line=e.lineno) from e
    if schema is not None:
        errors = sorted(
            jsonschema.Draft7Validator(schema).iter_errors(doc), key=lambda e: list(e.absolute_path)
        )
        if errors:
            e = errors[0]
            raise ScenarioError(f"schema violation: {e.message}", path=_json_path(e.absolute_path))
    return doc


def scenario_from_dict(doc: dict) -> tuple[Scenario, Behavior]:
    s = Scenario(
        tuple(Observable(o["id"], o["arity"]) for o in doc["observables"]),
        tuple(Context(c["id"], tuple(c["observables"])) for c in doc["contexts"]),
    )
    return s, Behavior(s, doc.get("tables", {}))


def scenario_to_dict(s: Scenario, b: Behavior | None = None) -> dict:
    doc = {
        "observables": [{"id": o.id, "arity": int(o.arity)} for o in s.observables],
        "contexts": [{"id": c.id, "observables": list(c.observables)} for c in s.contexts],
        "tables": {},
    }
    if b is not None:
        doc["tables"] = {cid: [float(x) for x in t] for cid, t in b.tables.items()}
    return doc


def load_scenario(path, tol: float = DEFAULT_TOL) -> tuple[Scenario, Behavior]:
    """Read a scenario/behavior file and check it end to end.

    Raises :class:`ScenarioError` on syntax errors, schema violations and on
    any scenario or table invariant violation (the first one found).
    """
    s, b = scenario_from_dict(read_json(path, SCENARIO_SCHEMA))
    report = validate_behavior(b, tol)
    if not report.ok:
        v = report.violations[0]
        raise ScenarioError(f"schema violation: {v.message}", path=v.location)
    return s, b


def save_scenario(s: Scenario, b: Behavior | None, path) -> None:
    # json uses repr() for floats, the shortest string that round-trips exactly
    atomic_write_text(path, json.dumps(scenario_to_dict(s, b), indent=2) + "\n")


def save_report(report, path) -> None:
    """Write a report (anything with ``to_dict`` or a plain dict) as JSON."""
    doc = report.to_dict() if hasattr(report, "to_dict") else report
    atomic_write_text(path, json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n")


def chsh_scenario(settings: int = 2, outcomes: int = 2) -> Scenario:
    """Bipartite Bell scenario: observables A0.., B0..; contexts ``"x,y"`` = (A_x, B_y)."""
    obs = [Observable(f"A{x}", outcomes) for x in range(settings)]
    obs += [Observable(f"B{y}", outcomes) for y in range(settings)]
    ctx = [Context(f"{x},{y}", (f"A{x}", f"B{y}")) for x in range(settings) for y in range(settings)]
    return Scenario(tuple(obs), tuple(ctx))
