import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxglue.intervention import (
    AMPLITUDE, STOCHASTIC, InterventionError, InterventionModel, InterventionOp, SharedState, apply,
    branch_states, check_single_state, commutator_norm, model_from_dict, model_to_dict, order_effect,
    order_effect_report, qubit_question, sequential_stats,
)
from ctxglue.scenario import read_json

from oracles import matmul, mi_double_sum, sequential_pair_bruteforce

E1 = SharedState(AMPLITUDE, [1, 0])
C2, S2 = math.cos(math.pi / 8) ** 2, math.sin(math.pi / 8) ** 2


def qubit_pair():
    return InterventionModel(E1, {"A": qubit_question("A", 0.0), "B": qubit_question("B", math.pi / 4)})


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_amplitude_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return SharedState(AMPLITUDE, v / np.linalg.norm(v))


def test_identity_op_leaves_state():
    x = SharedState(STOCHASTIC, [0.2, 0.5, 0.3])
    y, probs = apply(InterventionOp("I", STOCHASTIC, np.eye(3)), x)
    assert np.array_equal(y.vector, x.vector)
    assert np.allclose(probs, [0.2, 0.5, 0.3])


def test_permutation_op_moves_basis_state():
    perm = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    y, probs = apply(InterventionOp("P", STOCHASTIC, perm), SharedState(STOCHASTIC, [1, 0, 0]))
    assert np.array_equal(y.vector, [0, 1, 0])
    assert np.array_equal(probs, [0, 1, 0])


def test_45_degree_question_outcomes():
    _, probs = apply(qubit_question("B", math.pi / 4), E1)
    # projector onto (cos 22.5, sin 22.5): |<e1|v>|^2 = cos^2 22.5
    assert np.allclose(probs, [math.cos(math.radians(22.5)) ** 2, math.sin(math.radians(22.5)) ** 2], atol=1e-12)
    y, _ = apply(qubit_question("B", math.pi / 4), E1, outcome=1)
    assert abs(np.linalg.norm(y.vector) - 1) <= 1e-12
    assert abs(np.vdot([math.sin(math.pi / 8), -math.cos(math.pi / 8)], y.vector)) == pytest.approx(1.0)


def test_apply_errors():
    with pytest.raises(InterventionError, match="does not match"):
        apply(qubit_question("A"), SharedState(STOCHASTIC, [1, 0]))
    with pytest.raises(InterventionError, match="zero probability"):
        apply(qubit_question("A"), E1, outcome=1)
    assert branch_states(qubit_question("A"), E1)[1] is None


def test_op_validation():
    with pytest.raises(InterventionError, match="column-stochastic"):
        InterventionOp("bad", STOCHASTIC, [[0.5, 0.5], [0.4, 0.5]])
    with pytest.raises(InterventionError, match="unitary"):
        InterventionOp("bad", AMPLITUDE, [[1, 1], [0, 1]])
    with pytest.raises(InterventionError, match="sum to the identity"):
        InterventionOp("bad", AMPLITUDE, np.eye(2), (np.diag([1, 0]),))
    with pytest.raises(InterventionError, match="orthogonal"):
        InterventionOp("bad", AMPLITUDE, np.eye(2), (np.diag([1, 0]), np.full((2, 2), 0.5), np.zeros((2, 2))))
    with pytest.raises(InterventionError):
        SharedState(AMPLITUDE, [1, 1])


def test_sequential_single_op():
    m = qubit_pair()
    _, probs = apply(m.op("B"), m.initial)
    assert np.allclose(sequential_stats(m, ["B"]), probs, atol=1e-15)
    with pytest.raises(InterventionError, match="unknown context"):
        sequential_stats(m, ["Z"])


def test_45_degree_pair_against_bruteforce():
    m = qubit_pair()
    pa = [p.tolist() for p in m.op("A").projectors]
    pb = [p.tolist() for p in m.op("B").projectors]
    psi = [1.0, 0.0]
    ab = sequential_pair_bruteforce(pa, pb, psi)
    ba = sequential_pair_bruteforce(pb, pa, psi)
    assert np.allclose(sequential_stats(m, ["A", "B"]), ab, atol=1e-12)
    assert np.allclose(sequential_stats(m, ["B", "A"]), ba, atol=1e-12)
    tv = 0.5 * sum(abs(ab[i][j] - ba[j][i]) for i in range(2) for j in range(2))
    assert order_effect(m, "A", "B") == pytest.approx(tv, abs=1e-9)
    assert order_effect(m, "A", "B") > 0.01
    # by hand: AB = [[c, s], [0, 0]], aligned BA = [[c^2, s^2], [cs, cs]]
    assert tv == pytest.approx(0.25, abs=1e-12)
    assert not np.allclose(sequential_stats(m, ["A", "B"]), sequential_stats(m, ["B", "A"]).T)


def test_order_effect_report_views():
    r = order_effect_report(qubit_pair(), "A", "B")
    assert r.tv == pytest.approx(0.25)
    # conditioned on A = yes the B answer is (c, s) in the AB order, (c^2, s^2)/(c^2 + s^2) in BA
    assert r.conditional_tv == pytest.approx(abs(C2 - C2 ** 2 / (C2 ** 2 + S2 ** 2)), abs=1e-12)
    assert r.qq == pytest.approx((S2 + 0) - (S2 ** 2 + C2 * S2), abs=1e-12)
    d = r.to_dict()
    assert d["kind"] == "order-effect" and d["pass"] is False


def test_commutator_examples():
    X = InterventionOp("X", AMPLITUDE, [[0, 1], [1, 0]])
    Z = InterventionOp("Z", AMPLITUDE, [[1, 0], [0, -1]])
    assert commutator_norm(X, Z) == pytest.approx(2.0)
    xz = np.array(matmul([[0, 1], [1, 0]], [[1, 0], [0, -1]])) - np.array(matmul([[1, 0], [0, -1]], [[0, 1], [1, 0]]))
    assert commutator_norm(X, Z) == np.max(np.abs(xz))
    assert commutator_norm(X, X) == 0.0
    D1 = InterventionOp("D1", STOCHASTIC, np.eye(3), (np.diag([1., 0, 0]), np.diag([0., 1, 1])))
    D2 = InterventionOp("D2", STOCHASTIC, np.eye(3), (np.diag([1., 1, 0]), np.diag([0., 0, 1])))
    assert commutator_norm(D1, D2) == 0.0


def test_commuting_fixture(fixtures_dir):
    m = model_from_dict(read_json(fixtures_dir / "commuting.json"))
    assert order_effect(m, "A", "B") <= 1e-9
    assert order_effect(m, "A", "A") == 0.0
    assert np.allclose(sequential_stats(m, ["A", "B"]), [[0.2, 0.0], [0.5, 0.3]])


def test_model_round_trip(fixtures_dir):
    m = model_from_dict(read_json(fixtures_dir / "qubit45.json"))
    m2 = model_from_dict(model_to_dict(m))
    assert np.array_equal(m2.initial.vector, m.initial.vector)
    assert order_effect(m2, "A", "B") == order_effect(m, "A", "B") == pytest.approx(0.25)


def test_single_state_examples():
    assert check_single_state(np.outer([0.3, 0.7], [0.5, 0.5])) == pytest.approx(0.0, abs=1e-15)
    assert check_single_state([[0.5, 0.0], [0.0, 0.5]]) == pytest.approx(1.0)
    j = [[0.3, 0.2], [0.2, 0.3]]
    assert check_single_state(j) == pytest.approx(mi_double_sum(j), abs=1e-12)
    assert check_single_state(j) == pytest.approx(0.029049405545331, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sequential_stats_is_a_distribution(seed):
    rng = np.random.default_rng(seed)
    d = 3
    ops = {}
    for cid in "ABC":
        U = random_unitary(rng, d)
        P = (np.outer(U[:, 0], U[:, 0].conj()), np.outer(U[:, 1], U[:, 1].conj()) + np.outer(U[:, 2], U[:, 2].conj()))
        ops[cid] = InterventionOp(cid, AMPLITUDE, random_unitary(rng, d), P)
    m = InterventionModel(random_amplitude_state(rng, d), ops)
    for order in (["A", "B"], ["C", "A", "B"], ["B", "B"]):
        j = sequential_stats(m, order)
        assert np.all(j >= 0) and abs(j.sum() - 1) <= 1e-9
    # branching consistency: the first-outcome marginal is apply()'s distribution
    _, probs = apply(m.op("A"), m.initial)
    assert np.max(np.abs(sequential_stats(m, ["A", "B"]).sum(axis=1) - probs)) <= 1e-12
    assert 0.0 <= order_effect(m, "A", "B") <= 1.0


def test_commuting_ops_give_no_order_effect_on_many_states():
    rng = np.random.default_rng(11)
    U = random_unitary(rng, 3)
    cols = [np.outer(U[:, k], U[:, k].conj()) for k in range(3)]
    a = InterventionOp("a", AMPLITUDE, np.eye(3), (cols[0], cols[1] + cols[2]))
    b = InterventionOp("b", AMPLITUDE, np.eye(3), (cols[0] + cols[1], cols[2]))
    assert commutator_norm(a, b) <= 1e-12
    for _ in range(100):
        m = InterventionModel(random_amplitude_state(rng, 3), {"a": a, "b": b})
        assert order_effect(m, "a", "b") <= 1e-9


def test_long_chains_keep_state_valid():
    rng = np.random.default_rng(5)
    x = random_amplitude_state(rng, 3)
    s = SharedState(STOCHASTIC, rng.dirichlet(np.ones(4)))
    for _ in range(1000):
        op = InterventionOp("u", AMPLITUDE, random_unitary(rng, 3))
        x, probs = apply(op, x)
        assert abs(probs.sum() - 1) <= 1e-9
        T = rng.dirichlet(np.ones(4), size=4).T  # columns are distributions
        s, _ = apply(InterventionOp("t", STOCHASTIC, T), s)
    assert abs(np.linalg.norm(x.vector) - 1) <= 1e-9
    assert abs(s.vector.sum() - 1) <= 1e-9 and np.all(s.vector >= 0)
