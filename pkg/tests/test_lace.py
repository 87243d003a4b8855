import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lacelab.lace import (
    IntervalGraph,
    IntervalTooLong,
    J_bruteforce,
    J_polynomial,
    J_via_laces,
    K_of,
    Lace,
    NotConnectedError,
    all_edges,
    check_KJ_identity,
    compatible_edges,
    enumerate_laces,
    enumerate_laces_bruteforce,
    is_connected,
    is_minimally_connected,
    lace_of,
)
from lacelab.walks import Walk

B = Fraction
BACK = Walk([(0,), (1,), (0,)])
STRAIGHT = Walk([(0, 0), (1, 0), (2, 0), (2, 1)])


def graphs(max_len=6):
    @st.composite
    def build(draw):
        L = draw(st.integers(1, max_len))
        edges = all_edges(0, L)
        chosen = draw(st.lists(st.sampled_from(edges), min_size=1, max_size=len(edges), unique=True))
        return IntervalGraph(0, L, chosen)

    return build()


def walks(d=2, max_len=10):
    return st.lists(st.integers(0, 2 * d - 1), max_size=max_len).map(lambda s: Walk.from_steps(d, s))


def test_connectivity_examples():
    assert is_connected(IntervalGraph(0, 3, [(0, 3)]))
    assert not is_connected(IntervalGraph(0, 3, [(0, 1), (1, 3)]))
    assert is_connected(IntervalGraph(0, 3, [(0, 2), (1, 3)]))


def test_K_examples():
    assert K_of(STRAIGHT, 0, 3, B(1, 2)) == 1
    assert K_of(BACK, 0, 2, B(1, 3)) == B(2, 3)
    w = Walk.from_steps(1, [0, 1, 0, 1, 1])
    for a in range(len(w)):
        assert K_of(w, a, a + 1, B(1, 2)) == 1


def test_J_bruteforce_examples():
    assert J_bruteforce(BACK, 0, 1, B(1, 2)) == 0
    assert J_bruteforce(BACK, 0, 2, B(1, 3)) == -B(1, 3)
    assert J_bruteforce(Walk([(0,), (1,), (2,)]), 0, 2, B(1, 3)) == 0
    with pytest.raises(IntervalTooLong):
        J_bruteforce(Walk.from_steps(1, [0] * 8), 0, 8, B(1, 2))


def test_lace_of_examples():
    assert lace_of(IntervalGraph(0, 3, [(0, 3)])).elements == ((0, 3),)
    assert lace_of(IntervalGraph(0, 3, [(0, 2), (1, 3)])).elements == ((0, 2), (1, 3))
    assert lace_of(IntervalGraph(0, 3, [(0, 3), (0, 2)])).elements == ((0, 3),)
    with pytest.raises(NotConnectedError):
        lace_of(IntervalGraph(0, 3, [(0, 1), (1, 3)]))


def test_compatible_edges_examples():
    n = 4
    single = Lace(0, n, ((0, n),))
    assert compatible_edges(single) == frozenset(all_edges(0, n)) - {(0, n)}
    assert (0, 1) in compatible_edges(Lace(0, 3, ((0, 2), (1, 3))))


@pytest.mark.parametrize("L", range(1, 7))
def test_D_subset_of_C(L):
    for N in range(1, L + 1):
        for lc in enumerate_laces(N, 0, L):
            marks = {p for e in lc.elements for p in e}
            D = {(s, t) for s, t in all_edges(0, L) if not any(s < m < t for m in marks)} - lc.edges
            assert D <= compatible_edges(lc)


def test_enumerate_laces_examples():
    assert [lc.elements for lc in enumerate_laces(1, 0, 5)] == [((0, 5),)]
    assert [lc.elements for lc in enumerate_laces(2, 0, 3)] == [((0, 2), (1, 3))]
    # the oracle decides the N=2 laces on [0,4]
    got = {lc.elements for lc in enumerate_laces(2, 0, 4)}
    assert got == {lc.elements for lc in enumerate_laces_bruteforce(2, 0, 4)}
    assert got == {((0, 2), (1, 4)), ((0, 3), (1, 4)), ((0, 3), (2, 4))}


@pytest.mark.parametrize("L", range(1, 7))
def test_enumerate_laces_matches_bruteforce(L):
    for N in range(1, L + 1):
        assert enumerate_laces(N, 0, L) == enumerate_laces_bruteforce(N, 0, L)


def test_lace_counts_are_odd_fibonacci():
    counts = [sum(len(enumerate_laces(N, 0, L)) for N in range(1, L + 1)) for L in range(1, 9)]
    assert counts == [1, 1, 2, 5, 13, 34, 89, 233]


@given(graphs())
def test_lace_of_idempotent_and_minimal(G):
    if not is_connected(G):
        return
    L = lace_of(G)
    assert L.edges <= G.edges
    assert is_minimally_connected(L.graph)
    assert lace_of(L.graph) == L


@given(graphs(5))
def test_projection_property(G):
    if not is_connected(G):
        return
    got = lace_of(G)
    for N in range(1, G.b + 1):
        for lc in enumerate_laces(N, 0, G.b):
            in_class = lc.edges <= G.edges and (G.edges - lc.edges) <= compatible_edges(lc)
            assert in_class == (got == lc)


def test_J_via_laces_examples():
    J, per = J_via_laces(STRAIGHT, 0, 3, B(1, 2))
    assert J == 0 and all(v == 0 for v in per.values())
    J, per = J_via_laces(BACK, 0, 2, B(1, 4))
    assert per == {1: B(1, 4)} and J == -B(1, 4)


@given(walks(max_len=8), st.fractions(0, 1, max_denominator=9))
def test_J_laces_equals_bruteforce(w, beta):
    n = len(w)
    for a in range(n + 1):
        for b in range(a + 1, min(n, a + 6) + 1):
            assert J_via_laces(w, a, b, beta)[0] == J_bruteforce(w, a, b, beta)


def test_J_polynomial_evaluates_terms():
    w = Walk.from_steps(1, [0, 1, 0, 1, 0, 1])
    poly = J_polynomial(w.coincidence_mask(), 6)
    beta = B(2, 7)
    _, per = J_via_laces(w, 0, 6, beta)
    for N, row in poly.items():
        assert per[N] == beta**N * sum(c * (1 - beta) ** k for k, c in row.items())


def test_KJ_examples():
    r = check_KJ_identity(Walk([(0, 0), (1, 0)]), B(1, 3))
    assert r.ok and r.lhs == r.rhs == 1
    r = check_KJ_identity(BACK, B(1, 3))
    assert r.ok and r.lhs == 1 - B(1, 3)


@given(walks(max_len=10), st.fractions(0, 1, max_denominator=11))
def test_KJ_identity(w, beta):
    if len(w) == 0:
        return
    assert check_KJ_identity(w, beta).ok


def test_KJ_mutation_caught():
    bad = [w for w in (Walk.from_steps(1, s) for s in itertools.product(range(2), repeat=4)) if not check_KJ_identity(w, B(1, 2), flip_sign_N=1).ok]
    assert bad
