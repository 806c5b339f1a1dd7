from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxglue.embedding import (
    EMBEDDABLE, MARGINAL, NON_EMBEDDABLE, SizeCapError, assignment_matrix, check_boolean_embedding,
    deterministic_hull_membership, enumerate_global_assignments, stacked_tables,
)
from ctxglue.nonlocality import BipartiteBehavior, pr_box, to_scenario, tsirelson_box
from ctxglue.scenario import Behavior, Context, Observable, Scenario, behavior_from_joint, chsh_scenario

from oracles import chsh_deterministic_max


def test_assignment_counts():
    two = Scenario((Observable("X", 2), Observable("Y", 2)), (Context("c", ("X", "Y")),))
    three = Scenario(tuple(Observable(f"T{i}", 3) for i in range(3)), (Context("c", ("T0", "T2")),))
    assert len(enumerate_global_assignments(two)) == 4
    assert len(enumerate_global_assignments(chsh_scenario())) == 16
    a = enumerate_global_assignments(three)
    assert len(a) == 27 and len(set(a)) == 27
    assert a[1].as_dict() == {"T0": 0, "T1": 0, "T2": 1}  # last observable fastest


def test_assignment_cap():
    s = Scenario(tuple(Observable(f"X{i}", 2) for i in range(21)), (Context("c", ("X0",)),))
    with pytest.raises(SizeCapError, match="cap"):
        enumerate_global_assignments(s)
    with pytest.raises(SizeCapError):
        assignment_matrix(Scenario((Observable("X", 4),), (Context("c", ("X",)),)), cap=3)


def test_explicit_joint_is_recovered():
    rng = np.random.default_rng(7)
    s = chsh_scenario()
    b = behavior_from_joint(s, rng.dirichlet(np.ones(16)))
    cert = check_boolean_embedding(b)
    assert cert.status == EMBEDDABLE and cert.margin > 0
    assert cert.max_residual <= 1e-9
    V = assignment_matrix(s)
    weights = np.array([cert.joint.get(a, 0.0) for a in enumerate_global_assignments(s)])
    assert abs(weights.sum() - 1) <= 1e-9
    assert np.max(np.abs(V.T @ weights - stacked_tables(b))) <= 1e-9


def test_pr_box_witness_is_chsh():
    cert = check_boolean_embedding(to_scenario(pr_box()))
    assert cert.status == NON_EMBEDDABLE
    assert cert.margin == pytest.approx(2.0, abs=1e-9)
    assert cert.witness_value == pytest.approx(4.0, abs=1e-9)
    assert cert.witness_bound == pytest.approx(chsh_deterministic_max(), abs=1e-9)


def test_tsirelson_margin():
    cert = check_boolean_embedding(to_scenario(tsirelson_box()))
    assert cert.status == NON_EMBEDDABLE
    assert cert.margin == pytest.approx(2 * np.sqrt(2) - 2, abs=1e-6)


def test_disturbing_behavior_short_circuits():
    s = Scenario((Observable("X", 2),), (Context("c0", ("X",)), Context("c1", ("X",))))
    cert = check_boolean_embedding(Behavior(s, {"c0": [0.6, 0.4], "c1": [0.4, 0.6]}))
    assert cert.status == NON_EMBEDDABLE
    assert cert.disturbance == pytest.approx(0.2)
    assert "marginals differ" in cert.reason
    # the witness is zero on every global assignment and 0.2 on the behavior
    assert cert.witness_bound == 0.0 and cert.witness_value == pytest.approx(0.2)


def test_face_point_is_embeddable_with_zero_margin():
    s = chsh_scenario()
    V = assignment_matrix(s)
    b = Behavior(s, dict(zip(s.context_ids, np.split(0.5 * V[0] + 0.5 * V[5], 4))))
    cert = check_boolean_embedding(b)
    assert cert.status == EMBEDDABLE and cert.margin == 0.0


def test_just_outside_is_not_called_contextual():
    # a CHSH-saturating vertex pushed towards the PR box by less than tol
    v = np.zeros((2, 2, 2, 2))
    v[:, :, 0, 0] = 1.0
    eps = 2e-10
    b = to_scenario(BipartiteBehavior((1 - eps) * v + eps * pr_box().p))
    cert = check_boolean_embedding(b, tol=1e-9)
    assert cert.status in (MARGINAL, EMBEDDABLE)
    assert cert.feasibility_margin <= 1e-9
    assert check_boolean_embedding(to_scenario(BipartiteBehavior((1 - 1e-6) * v + 1e-6 * pr_box().p))).status == NON_EMBEDDABLE


def test_oracle_examples():
    s = chsh_scenario()
    V = assignment_matrix(s)
    vertex = Behavior(s, dict(zip(s.context_ids, np.split(V[3], 4))))
    assert deterministic_hull_membership(vertex) == (True, 0)
    member, margin = deterministic_hull_membership(to_scenario(pr_box()))
    assert not member and margin == -2
    exact = {c: [F(1, 4)] * 4 for c in s.context_ids}
    member, margin = deterministic_hull_membership(Behavior(s, {c: [0.25] * 4 for c in s.context_ids}), exact)
    assert member and margin == F(1, 16)


def test_oracle_size_limit():
    s = chsh_scenario(outcomes=3)
    with pytest.raises(SizeCapError):
        deterministic_hull_membership(behavior_from_joint(s, np.full(81, 1 / 81)))


def _rational_behavior(rng):
    """Random rational 2,2,2,2 behavior: a vertex mixture, optionally blended with the PR box."""
    V = assignment_matrix(chsh_scenario()).astype(int)
    k = int(rng.integers(1, 17))
    idx = rng.choice(16, k, replace=False)
    w = rng.integers(1, 21, k)
    cells = [sum(F(int(w[j]), int(w.sum())) * int(V[idx[j], c]) for j in range(k)) for c in range(16)]
    if rng.random() < 0.5:
        e = F(int(rng.integers(0, 101)), 100)
        pr = pr_box().p.reshape(-1)
        cells = [(1 - e) * F(pr[c]).limit_denominator(4) + e * cells[c] for c in range(16)]
    return cells


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lp_agrees_with_exact_oracle(seed):
    cells = _rational_behavior(np.random.default_rng(seed))
    s = chsh_scenario()
    exact = {c: cells[4 * i: 4 * i + 4] for i, c in enumerate(s.context_ids)}
    b = Behavior(s, {c: [float(x) for x in t] for c, t in exact.items()})
    cert = check_boolean_embedding(b)
    member, margin = deterministic_hull_membership(b, exact)
    if abs(margin) > 2e-9:
        assert (cert.status == EMBEDDABLE) == member
        assert abs(cert.feasibility_margin - float(margin)) <= 1e-7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_certificates_are_sound(seed):
    rng = np.random.default_rng(seed)
    s = chsh_scenario()
    mix = rng.uniform()
    local = behavior_from_joint(s, rng.dirichlet(np.ones(16) * 0.3))
    b = Behavior(s, {c: mix * pr_box().p.reshape(4, 4)[i] + (1 - mix) * local.table(c)
                     for i, c in enumerate(s.context_ids)})
    tol = 1e-9
    cert = check_boolean_embedding(b, tol)
    V = assignment_matrix(s)
    p = stacked_tables(b)
    if cert.status == EMBEDDABLE:
        w = np.array([cert.joint.get(a, 0.0) for a in enumerate_global_assignments(s)])
        assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-9
        assert np.max(np.abs(V.T @ w - p)) <= tol
    elif cert.status == NON_EMBEDDABLE:
        cells = [(c, k) for c in s.context_ids for k in range(4)]
        wv = np.array([cert.witness.get(cell, 0.0) for cell in cells])
        assert wv @ p > np.max(V @ wv) + tol
        assert cert.margin > tol


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mixing_in_embeddable_behavior_never_increases_separation(seed):
    rng = np.random.default_rng(seed)
    s = chsh_scenario()
    u = rng.uniform()
    local = behavior_from_joint(s, rng.dirichlet(np.ones(16) * 0.3))
    start = Behavior(s, {c: u * pr_box().p.reshape(4, 4)[i] + (1 - u) * local.table(c)
                         for i, c in enumerate(s.context_ids)})
    target = behavior_from_joint(s, rng.dirichlet(np.ones(16)))
    seps = []
    for lam in np.linspace(0, 1, 11):
        b = Behavior(s, {c: (1 - lam) * start.table(c) + lam * target.table(c) for c in s.context_ids})
        seps.append(-min(check_boolean_embedding(b).feasibility_margin, 0.0))
    assert all(b <= a + 1e-9 for a, b in zip(seps, seps[1:]))


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 1))
def test_signed_margin_monotone_toward_centroid(w):
    s = chsh_scenario()
    start = Behavior(s, {c: w * pr_box().p.reshape(4, 4)[i] + (1 - w) * tsirelson_box().p.reshape(4, 4)[i]
                         for i, c in enumerate(s.context_ids)})
    centroid = Behavior(s, {c: [0.25] * 4 for c in s.context_ids})
    margins = []
    for lam in np.linspace(0, 1, 11):
        b = Behavior(s, {c: (1 - lam) * start.table(c) + lam * centroid.table(c) for c in s.context_ids})
        margins.append(check_boolean_embedding(b).feasibility_margin)
    assert all(b >= a - 1e-9 for a, b in zip(margins, margins[1:]))
