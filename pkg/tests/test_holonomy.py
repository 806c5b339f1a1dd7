import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxglue.holonomy import (
    ATLAS_SCHEMA, Atlas, HolonomyError, LogicWorld, TransitionMap, atlas_from_dict, atlas_to_dict,
    compose_path, enumerate_loops, flatness_check, gauge_transform, gluing_phase, loop_holonomy,
    random_atlas, wrap_to_pi,
)
from ctxglue.projection import BranchData, glued_projection, ltp_predict
from ctxglue.scenario import read_json

from oracles import wrap

ATOMS = ("yes", "no")


def chain_atlas(n, offsets_by_hop, atoms=ATOMS, close=None):
    ids = [f"c{i}" for i in range(n)]
    worlds = {w: LogicWorld.uniform(w, atoms) for w in ids}
    trans = [TransitionMap.identity(ids[i], ids[i + 1], atoms, offsets_by_hop[i]) for i in range(n - 1)]
    if close is not None:
        trans.append(TransitionMap.identity(ids[-1], ids[0], atoms, close))
    return Atlas(worlds, trans)


def two_cycle(alpha, beta):
    worlds = {w: LogicWorld.uniform(w, ATOMS) for w in ("a", "b")}
    return Atlas(worlds, [TransitionMap.identity("a", "b", ATOMS, alpha), TransitionMap.identity("b", "a", ATOMS, beta)])


def test_wrap_convention():
    assert wrap_to_pi(math.pi) == math.pi
    assert wrap_to_pi(-math.pi) == pytest.approx(math.pi)
    assert wrap_to_pi(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_to_pi(0.3) == 0.3
    for x in np.linspace(-20, 20, 101):
        assert wrap_to_pi(x) == pytest.approx(wrap(x), abs=1e-12)


def test_world_and_map_validation():
    with pytest.raises(HolonomyError, match="repeated"):
        LogicWorld("w", ("a", "a"), (0.5, 0.5))
    with pytest.raises(HolonomyError, match="distribution"):
        LogicWorld("w", ("a", "b"), (0.5, 0.6))
    with pytest.raises(HolonomyError, match="injective"):
        TransitionMap("a", "b", {"x": "y", "z": "y"}, {})
    with pytest.raises(HolonomyError, match="non-finite"):
        TransitionMap("a", "b", {"x": "y"}, {"x": math.inf})
    w = {k: LogicWorld.uniform(k, ATOMS) for k in "ab"}
    with pytest.raises(HolonomyError, match="two maps"):
        Atlas(w, [TransitionMap.identity("a", "b", ATOMS)] * 2)
    with pytest.raises(HolonomyError, match="not a world"):
        Atlas(w, [TransitionMap.identity("a", "q", ATOMS)])


def test_compose_examples():
    a = chain_atlas(3, [0.0, 0.0])
    c = compose_path(a, ["c0", "c1", "c2"])
    assert c.correspondence == {"yes": "yes", "no": "no"} and c.phases == {"yes": 0.0, "no": 0.0}
    c = compose_path(chain_atlas(3, [0.4, 0.5]), ["c0", "c1", "c2"])
    assert c.phases["yes"] == 0.4 + 0.5
    c = compose_path(chain_atlas(4, [0.1, 0.2, 0.3]), ["c0", "c1", "c2", "c3"])
    assert c.phases["yes"] == pytest.approx(0.6, abs=1e-15) and c.phases["no"] == pytest.approx(0.6, abs=1e-15)


def test_compose_errors():
    a = chain_atlas(3, [0.0, 0.0])
    with pytest.raises(HolonomyError, match="no transition"):
        compose_path(a, ["c0", "c2"])
    w = {k: LogicWorld.uniform(k, ATOMS) for k in ("x", "y", "z")}
    broken = Atlas(w, [TransitionMap.identity("x", "y", ATOMS), TransitionMap("y", "z", {"yes": "yes"}, {})])
    with pytest.raises(HolonomyError, match="no image"):
        compose_path(broken, ["x", "y", "z"])


def test_loop_examples():
    assert loop_holonomy(chain_atlas(3, [0.0, 0.0], close=0.0), ["c0", "c1", "c2", "c0"]).flat
    r = loop_holonomy(two_cycle(0.5, 0.3), ["a", "b", "a"])
    assert r.per_branch_phase == {"yes": 0.5 + 0.3, "no": 0.5 + 0.3} and not r.flat
    sq = loop_holonomy(chain_atlas(4, [math.pi / 4] * 3, close=math.pi / 4), ["c0", "c1", "c2", "c3", "c0"])
    assert all(p == pytest.approx(math.pi, abs=1e-15) for p in sq.per_branch_phase.values())
    assert not sq.flat
    with pytest.raises(HolonomyError, match="end where it starts"):
        loop_holonomy(two_cycle(0, 0), ["a", "b"])


def test_swapping_loop_is_non_returning():
    w = {k: LogicWorld.uniform(k, ATOMS) for k in "ab"}
    swap = TransitionMap("a", "b", {"yes": "no", "no": "yes"}, {})
    atlas = Atlas(w, [swap, TransitionMap.identity("b", "a", ATOMS)])
    r = loop_holonomy(atlas, ["a", "b", "a"])
    assert not r.flat and r.max_abs_phase == 0.0
    assert r.non_returning == {"yes": "no", "no": "yes"}


def test_gluing_phase_examples():
    assert gluing_phase(chain_atlas(2, [0.7]), "yes", "no", ["c0", "c1"]).theta == 0.0
    a = chain_atlas(2, [{"yes": 0.3, "no": 1.1}])
    assert gluing_phase(a, "yes", "no", ["c0", "c1"]).theta == pytest.approx(0.8, abs=1e-15)
    b = chain_atlas(2, [{"yes": 1.0, "no": 0.2}])
    assert gluing_phase(b, "yes", "no", ["c0", "c1"]).theta == pytest.approx(2 * math.pi - 0.8)
    with pytest.raises(HolonomyError, match="not transportable"):
        gluing_phase(a, "yes", "maybe", ["c0", "c1"])


def test_quarter_turn_gluing_gives_ltp():
    a = chain_atlas(3, [{"yes": 0.2, "no": 0.9}, {"yes": 0.1, "no": math.pi / 2 - 0.7 + 0.1}])
    theta = gluing_phase(a, "yes", "no", ["c0", "c1", "c2"]).theta
    assert theta == pytest.approx(math.pi / 2, abs=1e-15)
    d = BranchData(0.6, 0.5, 0.4, 0.25)
    assert glued_projection(d, theta).probability == pytest.approx(ltp_predict(d), abs=1e-12)


def test_flatness_examples(fixtures_dir):
    doc = read_json(fixtures_dir / "atlas_flat.json", ATLAS_SCHEMA)
    rep = flatness_check(atlas_from_dict(doc))
    assert rep.flat and rep.max_abs_phase <= 1e-15 and rep.loops
    rep = flatness_check(atlas_from_dict(read_json(fixtures_dir / "atlas_nonflat.json", ATLAS_SCHEMA)))
    assert not rep.flat
    assert len(rep.witness.loop) == 3  # a two-hop cycle
    assert rep.max_abs_phase == pytest.approx(0.8)
    assert rep.to_dict()["kind"] == "holonomy"


def test_loop_enumeration_is_deterministic():
    a = random_atlas(np.random.default_rng(3), n_worlds=5, edge_prob=1.0)
    loops = enumerate_loops(a, 3)
    assert loops == enumerate_loops(a, 3)
    assert all(l[0] == min(l) and l[0] == l[-1] for l in loops)
    # complete digraph on 5 nodes: C(5,2) two-cycles + 2 * C(5,3) three-cycles
    assert len(loops) == 10 + 20


def test_atlas_round_trip():
    a = random_atlas(np.random.default_rng(1))
    b = atlas_from_dict(atlas_to_dict(a))
    assert b.transitions == a.transitions and b.worlds == a.worlds


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=6))
def test_path_additivity(offsets):
    n = len(offsets) + 1
    a = chain_atlas(n, offsets)
    ids = [f"c{i}" for i in range(n)]
    k = len(offsets) // 2 + 1
    head, tail = compose_path(a, ids[:k]), compose_path(a, ids[k - 1:])
    whole = compose_path(a, ids)
    assert whole.phases["yes"] == pytest.approx(head.phases["yes"] + tail.phases["yes"], abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_orientation_reversal(f01, f12, f20):
    ids = ["c0", "c1", "c2"]
    worlds = {w: LogicWorld.uniform(w, ATOMS) for w in ids}
    fwd = [("c0", "c1", f01), ("c1", "c2", f12), ("c2", "c0", f20)]
    trans = [TransitionMap.identity(s, t, ATOMS, p) for s, t, p in fwd]
    trans += [TransitionMap.identity(t, s, ATOMS, -p) for s, t, p in fwd]  # exact inverses
    a = Atlas(worlds, trans)
    h1 = loop_holonomy(a, ["c0", "c1", "c2", "c0"]).per_branch_phase["yes"]
    h2 = loop_holonomy(a, ["c0", "c2", "c1", "c0"]).per_branch_phase["yes"]
    assert abs(wrap_to_pi(h1 + h2)) <= 1e-12


def test_gauge_invariance_on_random_atlases():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        a = random_atlas(rng, n_worlds=int(rng.integers(2, 6)), edge_prob=0.7)
        delta = {w: rng.uniform(-10, 10) for w in a.worlds}
        g = gauge_transform(a, delta)
        for loop in enumerate_loops(a, 6):
            h0 = loop_holonomy(a, loop).per_branch_phase
            h1 = loop_holonomy(g, loop).per_branch_phase
            for atom in h0:
                assert abs(wrap_to_pi(h0[atom] - h1[atom])) <= 1e-12


def test_flat_atlas_gluing_is_path_independent():
    rng = np.random.default_rng(8)
    ids = [f"w{i}" for i in range(4)]
    pot = {w: {a: rng.uniform(-3, 3) for a in ATOMS} for w in ids}  # branch potentials make every loop flat
    worlds = {w: LogicWorld.uniform(w, ATOMS) for w in ids}
    trans = [TransitionMap.identity(s, t, ATOMS, {a: pot[t][a] - pot[s][a] for a in ATOMS})
             for s in ids for t in ids if s != t]
    a = Atlas(worlds, trans)
    assert flatness_check(a, 4, tol=1e-12).flat
    paths = [["w0", "w3"], ["w0", "w1", "w3"], ["w0", "w2", "w3"], ["w0", "w1", "w2", "w3"], ["w0", "w2", "w1", "w3"]]
    thetas = [gluing_phase(a, "yes", "no", p, q).theta for p in paths for q in paths]
    ref = thetas[0]
    assert all(abs(wrap_to_pi(t - ref)) <= 1e-12 for t in thetas)
