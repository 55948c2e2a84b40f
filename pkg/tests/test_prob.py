import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from diropt import NonErgodicError, ValidationError
from diropt.prob import (
    StochasticTable, conditional_mutual_information, entropy, mutual_information, prob_vector,
    recurrent_classes, stationary_distribution, validate_table,
)


def table(rows):
    rows = np.asarray(rows, float)
    return StochasticTable([(i,) for i in range(len(rows))], tuple(range(rows.shape[1])), rows)


def test_valid_table_has_empty_report():
    assert validate_table(table([[0.5, 0.5], [0.3, 0.7]])) == []


def test_normalization_violation_reports_excess():
    (v,) = validate_table(table([[0.5, 0.6]]))
    assert v.kind == "normalization"
    assert v.amount == pytest.approx(0.1)
    assert "[0]" in str(v)


def test_negative_entry_is_flagged():
    kinds = {v.kind for v in validate_table(table([[-0.1, 1.1]]))}
    assert kinds == {"negative"}


def test_absent_rows_are_not_validated():
    t = StochasticTable([(0,), (1,)], (0, 1), [[0.5, 0.5], [3.0, 3.0]], defined=[True, False])
    assert validate_table(t) == []
    assert t.row((1,)) is None
    assert t.probs[1].sum() == 0


def test_from_rows_rejects_unknown_output():
    with pytest.raises(ValidationError, match="unknown output"):
        StochasticTable.from_rows({(0,): {"z": 1.0}}, ("a", "b"))


def test_prob_vector_checks():
    assert prob_vector([0.25, 0.75]).sum() == 1.0
    with pytest.raises(ValidationError):
        prob_vector([0.5, 0.6])
    with pytest.raises(ValidationError):
        prob_vector([-0.5, 1.5])


def test_stationary_symmetric():
    np.testing.assert_allclose(stationary_distribution([[0.5, 0.5], [0.5, 0.5]]), [0.5, 0.5])


def test_stationary_birth_death_matches_detailed_balance():
    p0, p1, q1, q2 = 0.3, 0.3, 0.2, 0.4
    T = [[1 - p0, p0, 0], [q1, 1 - p1 - q1, p1], [0, q2, 1 - q2]]
    ratios = np.cumprod([1.0, p0 / q1, p1 / q2])
    np.testing.assert_allclose(stationary_distribution(T), ratios / ratios.sum(), atol=1e-15)
    np.testing.assert_allclose(stationary_distribution(T), [0.275862, 0.413793, 0.310345], atol=1e-6)


def test_identity_is_not_ergodic():
    with pytest.raises(NonErgodicError) as info:
        stationary_distribution(np.eye(2))
    assert info.value.classes == [[0], [1]]


def test_periodic_chain_is_solved():
    np.testing.assert_allclose(stationary_distribution([[0, 1], [1, 0]]), [0.5, 0.5])


def test_transient_states_get_zero_mass():
    T = [[0.5, 0.5, 0.0], [0.0, 0.3, 0.7], [0.0, 0.6, 0.4]]
    pi = stationary_distribution(T)
    assert pi[0] == 0
    assert [c.tolist() for c in recurrent_classes(T)] == [[1, 2]]


def test_stationary_fixed_point_on_random_chains():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = rng.integers(1, 13)
        T = rng.random((n, n)) * (rng.random((n, n)) < 0.6)
        T[np.arange(n), (np.arange(n) + 1) % n] += 0.1  # a cycle keeps it irreducible
        T /= T.sum(axis=1, keepdims=True)
        pi = stationary_distribution(T)
        worst = max(worst, np.abs(pi @ T - pi).max())
    assert worst <= 1e-12


def test_entropy_examples():
    assert entropy([0.5, 0.5]) == 1.0
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.2, 0.8]) == pytest.approx(0.721928, abs=1e-6)


def test_cmi_examples():
    indep = np.einsum("s,sa,sb->sab", [0.3, 0.7], [[0.2, 0.8], [0.6, 0.4]], [[0.5, 0.5], [0.1, 0.9]])
    assert conditional_mutual_information(indep) == pytest.approx(0.0, abs=1e-15)
    assert conditional_mutual_information(np.diag([0.5, 0.5])) == pytest.approx(1.0)


def test_cmi_selector_example_against_triple_sum():
    P = np.zeros((2, 2, 2))
    for s, a, b in itertools.product(range(2), repeat=3):
        if s == 0:
            P[s, a, b] = 0.5 * 0.5 * (a == b)
        else:
            P[s, a, b] = 0.5 * 0.25
    total = 0.0
    for s, a, b in itertools.product(range(2), repeat=3):
        if P[s, a, b] > 0:
            ps = P[s].sum()
            total += P[s, a, b] * np.log2(P[s, a, b] * ps / (P[s, a].sum() * P[s, :, b].sum()))
    assert total == pytest.approx(0.5)
    assert conditional_mutual_information(P) == pytest.approx(total, abs=1e-15)


def test_mutual_information_bsc():
    P = 0.5 * np.array([[0.9, 0.1], [0.1, 0.9]])
    assert mutual_information(P) == pytest.approx(1 - entropy([0.1, 0.9]), abs=1e-15)


dist = arrays(float, st.integers(1, 8), elements=st.floats(0, 1)).filter(lambda a: a.sum() > 1e-3)


@settings(max_examples=200, deadline=None)
@given(dist)
def test_entropy_bounds(raw):
    p = raw / raw.sum()
    h = entropy(p)
    assert -1e-12 <= h <= np.log2(len(p)) + 1e-12


@settings(max_examples=200, deadline=None)
@given(arrays(float, (3, 2, 4), elements=st.floats(0, 1)).filter(lambda a: a.sum() > 1e-3))
def test_cmi_nonnegative(raw):
    assert conditional_mutual_information(raw / raw.sum()) >= 0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_cmi_zero_on_factorized_joints(seed, S, A, B):
    rng = np.random.default_rng(seed)
    ps = rng.dirichlet(np.ones(S))
    pa = rng.dirichlet(np.ones(A), size=S)
    pb = rng.dirichlet(np.ones(B), size=S)
    P = np.einsum("s,sa,sb->sab", ps, pa, pb)
    assert conditional_mutual_information(P) == pytest.approx(0.0, abs=1e-12)
