"""Phase-carrying transport between local logic-worlds.

Each world is a context with a measure on its atoms.  A transition map sends
atoms of one world to atoms of another and attaches a phase offset to every
transported branch; magnitudes are never changed.  Composing maps around a
closed loop gives a per-branch phase (the holonomy); an atlas whose loops
all come back with zero phase is flat.

Conventions: holonomy phases are reduced to (-pi, pi]; gluing phases to
[0, 2pi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .projection import GluingPhase

DEFAULT_TOL = 1e-9
TWO_PI = 2.0 * math.pi
MAX_LOOPS = 100_000


class HolonomyError(ValueError):
    pass


def wrap_to_pi(x: float) -> float:
    """Reduce an angle to (-pi, pi]; values already in range are returned unchanged."""
    x = float(x)
    if -math.pi < x <= math.pi:
        return x
    r = math.fmod(x, TWO_PI)
    if r > math.pi:
        r -= TWO_PI
    elif r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class LogicWorld:
    id: str
    atoms: tuple[str, ...]
    measure: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "measure", tuple(float(x) for x in self.measure))
        if len(set(self.atoms)) != len(self.atoms):
            raise HolonomyError(f"world {self.id!r} has repeated atoms")
        if len(self.measure) != len(self.atoms):
            raise HolonomyError(f"world {self.id!r}: measure length does not match atoms")
        if any(m < 0 for m in self.measure) or abs(sum(self.measure) - 1.0) > 1e-9:
            raise HolonomyError(f"world {self.id!r}: measure is not a distribution")

    @classmethod
    def uniform(cls, id: str, atoms: Sequence[str]) -> "LogicWorld":
        return cls(id, tuple(atoms), tuple([1.0 / len(atoms)] * len(atoms)))


@dataclass(frozen=True)
class TransitionMap:
    source: str
    target: str
    correspondence: Mapping[str, str]
    phase_offsets: Mapping[str, float]

    def __post_init__(self):
        corr = dict(self.correspondence)
        phases = {a: float(self.phase_offsets.get(a, 0.0)) for a in corr}
        if len(set(corr.values())) != len(corr):
            raise HolonomyError(f"transition {self.source}->{self.target} is not injective")
        if extra := set(self.phase_offsets) - set(corr):
            raise HolonomyError(f"transition {self.source}->{self.target}: phases for unmapped atoms {sorted(extra)}")
        if not all(math.isfinite(v) for v in phases.values()):
            raise HolonomyError(f"transition {self.source}->{self.target} has a non-finite phase")
        object.__setattr__(self, "correspondence", corr)
        object.__setattr__(self, "phase_offsets", phases)

    @classmethod
    def identity(cls, source: str, target: str, atoms: Sequence[str], phase: float | Mapping[str, float] = 0.0):
        if not isinstance(phase, Mapping):
            phase = {a: phase for a in atoms}
        return cls(source, target, {a: a for a in atoms}, dict(phase))


@dataclass
class Atlas:
    worlds: dict[str, LogicWorld]
    transitions: list[TransitionMap] = field(default_factory=list)

    def __post_init__(self):
        self._index: dict[tuple[str, str], TransitionMap] = {}
        for t in self.transitions:
            for end in (t.source, t.target):
                if end not in self.worlds:
                    raise HolonomyError(f"transition endpoint {end!r} is not a world")
            key = (t.source, t.target)
            if key in self._index:
                raise HolonomyError(f"two maps declared for {t.source}->{t.target}")
            src, dst = set(self.worlds[t.source].atoms), set(self.worlds[t.target].atoms)
            if not set(t.correspondence) <= src or not set(t.correspondence.values()) <= dst:
                raise HolonomyError(f"transition {t.source}->{t.target} uses atoms outside its worlds")
            self._index[key] = t

    def transition(self, source: str, target: str) -> TransitionMap:
        try:
            return self._index[(source, target)]
        except KeyError:
            raise HolonomyError(f"no transition declared for {source}->{target}") from None

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.worlds)
        g.add_edges_from(self._index)
        return g


@dataclass(frozen=True)
class Composite:
    """Composed transport: start atom -> (end atom, accumulated phase)."""

    path: tuple[str, ...]
    correspondence: dict[str, str]
    phases: dict[str, float]


def compose_path(atlas: Atlas, path: Sequence[str]) -> Composite:
    """Relational composition along ``path``; phases add per branch.

    Every atom of the starting world that has an image under the first hop
    must keep having images all the way; a branch that falls off the chain
    raises :class:`HolonomyError`.
    """
    path = tuple(path)
    if len(path) < 1:
        raise HolonomyError("empty path")
    if path[0] not in atlas.worlds:
        raise HolonomyError(f"unknown world {path[0]!r}")
    if len(path) == 1:
        atoms = atlas.worlds[path[0]].atoms
        return Composite(path, {a: a for a in atoms}, {a: 0.0 for a in atoms})
    first = atlas.transition(path[0], path[1])
    corr = dict(first.correspondence)
    phases = dict(first.phase_offsets)
    for s, t in zip(path[1:], path[2:]):
        hop = atlas.transition(s, t)
        for start, here in list(corr.items()):
            if here not in hop.correspondence:
                raise HolonomyError(f"branch {start!r} has no image at hop {s}->{t} (atom {here!r})")
            corr[start] = hop.correspondence[here]
            phases[start] += hop.phase_offsets[here]
    return Composite(path, corr, phases)


@dataclass
class HolonomyResult:
    loop: list[str]
    per_branch_phase: dict[str, float]
    flat: bool
    max_abs_phase: float
    non_returning: dict[str, str] = field(default_factory=dict)  # atom -> where it came back

    def to_dict(self) -> dict:
        return {
            "loop": list(self.loop),
            "per_branch_phase": self.per_branch_phase,
            "flat": self.flat,
            "max_abs_phase": self.max_abs_phase,
            "non_returning": self.non_returning,
        }


def loop_holonomy(atlas: Atlas, loop: Sequence[str], tol: float = DEFAULT_TOL) -> HolonomyResult:
    """Per-branch phase accumulated around a closed loop (first == last).

    Branches whose correspondence does not return them to themselves are
    listed in ``non_returning`` and make the loop non-flat regardless of
    phase; that structural failure is never folded into the phase numbers.
    """
    loop = list(loop)
    if len(loop) < 2 or loop[0] != loop[-1]:
        raise HolonomyError("a loop must have at least one hop and end where it starts")
    comp = compose_path(atlas, loop)
    phases = {a: wrap_to_pi(p) for a, p in comp.phases.items()}
    moved = {a: b for a, b in comp.correspondence.items() if a != b}
    worst = max((abs(p) for p in phases.values()), default=0.0)
    return HolonomyResult(loop, phases, worst <= tol and not moved, worst, moved)


def gluing_phase(atlas: Atlas, branch_A: str, branch_NotA: str,
                 via: Sequence[str], via_NotA: Sequence[str] | None = None) -> GluingPhase:
    """Relative transport phase of the not-A branch against the A branch.

    Both branches start in ``via[0]``; the A branch travels along ``via`` and
    the not-A branch along ``via_NotA`` (default: the same path).  Both must
    arrive at the same target world.
    """
    via_NotA = list(via) if via_NotA is None else list(via_NotA)
    if via[0] != via_NotA[0] or via[-1] != via_NotA[-1]:
        raise HolonomyError("both branches must share the source and target worlds")
    ca, cb = compose_path(atlas, via), compose_path(atlas, via_NotA)
    for atom, comp in ((branch_A, ca), (branch_NotA, cb)):
        if atom not in comp.phases:
            raise HolonomyError(f"branch {atom!r} is not transportable along {list(comp.path)}")
    return GluingPhase(cb.phases[branch_NotA] - ca.phases[branch_A])


def enumerate_loops(atlas: Atlas, max_loop_len: int = 6):
    """Simple directed cycles of at most ``max_loop_len`` hops, as closed node lists.

    Each cycle is rotated to start at its smallest world id, and the list is
    sorted, so the enumeration order is deterministic.
    """
    loops = []
    for cyc in nx.simple_cycles(atlas.graph(), length_bound=max_loop_len):
        i = cyc.index(min(cyc))
        cyc = cyc[i:] + cyc[:i]
        loops.append(cyc + [cyc[0]])
        if len(loops) > MAX_LOOPS:
            raise HolonomyError(f"more than {MAX_LOOPS} loops; lower max_loop_len")
    loops.sort(key=lambda c: (len(c), c))
    return loops


@dataclass
class FlatnessReport:
    flat: bool
    max_abs_phase: float
    witness: HolonomyResult | None
    loops: list[HolonomyResult]
    broken: list[tuple[list[str], str]] = field(default_factory=list)  # loops whose branches fall off

    def to_dict(self) -> dict:
        return {
            "kind": "holonomy",
            "pass": self.flat,
            "residuals": {"max_abs_phase": self.max_abs_phase},
            "details": {
                "loops_checked": len(self.loops),
                "witness": None if self.witness is None else self.witness.to_dict(),
                "loops": [r.to_dict() for r in self.loops],
                "broken": [{"loop": l, "reason": why} for l, why in self.broken],
            },
        }

    def rows(self):
        """(loop, branch, phase) rows, loops in enumeration order."""
        for r in self.loops:
            for atom, ph in r.per_branch_phase.items():
                yield "->".join(r.loop), atom, ph


def flatness_check(atlas: Atlas, max_loop_len: int = 6, tol: float = DEFAULT_TOL) -> FlatnessReport:
    """Holonomy of every simple loop up to the cap; reports the worst one."""
    results, broken = [], []
    for loop in enumerate_loops(atlas, max_loop_len):
        try:
            results.append(loop_holonomy(atlas, loop, tol))
        except HolonomyError as e:
            broken.append((loop, str(e)))
    witness = None
    worst = 0.0
    for r in results:
        if not r.flat and (witness is None or r.max_abs_phase > witness.max_abs_phase or witness.flat):
            witness = r
        worst = max(worst, r.max_abs_phase)
    flat = witness is None and not broken
    return FlatnessReport(flat, worst, witness, results, broken)


def gauge_transform(atlas: Atlas, delta: Mapping[str, float]) -> Atlas:
    """Shift every transition ``s -> t`` by ``delta[s] - delta[t]`` on all branches."""
    new = [
        TransitionMap(
            t.source, t.target, t.correspondence,
            {a: p + delta.get(t.source, 0.0) - delta.get(t.target, 0.0) for a, p in t.phase_offsets.items()},
        )
        for t in atlas.transitions
    ]
    return Atlas(dict(atlas.worlds), new)


# --------------------------------------------------------------------------
# file format

ATLAS_SCHEMA = {
    "type": "object",
    "required": ["worlds", "transitions"],
    "properties": {
        "worlds": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "atoms"],
                "properties": {
                    "id": {"type": "string"},
                    "atoms": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "measure": {"type": "array", "items": {"type": "number", "minimum": 0}},
                },
            },
        },
        "transitions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["source", "target", "branches"],
                "properties": {
                    "source": {"type": "string"},
                    "target": {"type": "string"},
                    "branches": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["from", "to"],
                            "properties": {
                                "from": {"type": "string"},
                                "to": {"type": "string"},
                                "phase": {"type": "number"},
                            },
                        },
                    },
                },
            },
        },
    },
}


def atlas_from_dict(doc: dict) -> Atlas:
    worlds = {}
    for w in doc["worlds"]:
        atoms = w["atoms"]
        measure = w.get("measure") or [1.0 / len(atoms)] * len(atoms)
        worlds[w["id"]] = LogicWorld(w["id"], atoms, measure)
    transitions = [
        TransitionMap(
            t["source"], t["target"],
            {br["from"]: br["to"] for br in t["branches"]},
            {br["from"]: br.get("phase", 0.0) for br in t["branches"]},
        )
        for t in doc["transitions"]
    ]
    return Atlas(worlds, transitions)


def atlas_to_dict(atlas: Atlas) -> dict:
    return {
        "worlds": [{"id": w.id, "atoms": list(w.atoms), "measure": list(w.measure)} for w in atlas.worlds.values()],
        "transitions": [
            {"source": t.source, "target": t.target,
             "branches": [{"from": a, "to": b, "phase": t.phase_offsets[a]} for a, b in t.correspondence.items()]}
            for t in atlas.transitions
        ],
    }


def random_atlas(rng: np.random.Generator, n_worlds: int = 4, atoms: Sequence[str] = ("a", "b"),
                 edge_prob: float = 0.6) -> Atlas:
    """Random atlas on a shared atom set with identity correspondences and random phases."""
    ids = [f"w{i}" for i in range(n_worlds)]
    worlds = {w: LogicWorld.uniform(w, atoms) for w in ids}
    trans = []
    for s in ids:
        for t in ids:
            if s != t and rng.random() < edge_prob:
                trans.append(TransitionMap.identity(s, t, atoms, {a: rng.uniform(-np.pi, np.pi) for a in atoms}))
    return Atlas(worlds, trans)
