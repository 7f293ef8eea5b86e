from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from repind.finrel import (
    Bijection,
    Carrier,
    FinMap,
    FinRelError,
    NotAnEquivalence,
    NotAQer,
    Rel,
    check_qer,
    compose_rel,
    equivalence_violation,
    equivalences,
    graph_rel,
    id_rel,
    induced_equiv,
    inverse_rel,
    is_equivalence,
    is_per,
    is_zigzag_complete,
    quotient,
    relations,
    total_rel,
    zigzag_counterexample,
)


def C(name, n):
    return Carrier.range(name, n)


def as_set(R: Rel):
    return set(R.pairs())


@st.composite
def rels(draw, max_size=4):
    n = draw(st.integers(0, max_size))
    m = draw(st.integers(0, max_size))
    bits = draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))
    return Rel(C("X", n), C("Y", m), np.array(bits, dtype=bool).reshape(n, m))


@st.composite
def chains(draw):
    sizes = draw(st.lists(st.integers(0, 3), min_size=4, max_size=4))
    names = "ABCD"
    out = []
    for i in range(3):
        n, m = sizes[i], sizes[i + 1]
        bits = draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))
        out.append(Rel(C(names[i], n), C(names[i + 1], m), np.array(bits, bool).reshape(n, m)))
    return out


# -- carriers -------------------------------------------------------------


def test_carrier_rejects_duplicate_labels():
    with pytest.raises(FinRelError, match="duplicate"):
        Carrier("A", ("a", "b", "a"))


def test_carrier_index_and_labels():
    A = Carrier("A", ("p", "q"))
    assert A.index("q") == 1
    assert A.label(0) == "p"
    assert A.values == ("p", "q")
    with pytest.raises(FinRelError):
        A.index("r")


# -- relation algebra -----------------------------------------------------


def test_inverse_of_single_pair():
    R = Rel.from_pairs(Carrier("X", ("x0",)), Carrier("Y", ("y0", "y1")), [(0, 0)])
    assert inverse_rel(R).pairs() == [(0, 0)]
    assert inverse_rel(R).dom.name == "Y"


@given(rels())
def test_inverse_is_involution_and_transpose(R):
    assert inverse_rel(inverse_rel(R)) == R
    assert as_set(inverse_rel(R)) == oracles.inverse(as_set(R))


@given(chains())
def test_compose_matches_oracle_and_is_associative(rs):
    R, S, T = rs
    assert as_set(compose_rel(R, S)) == oracles.compose(as_set(R), as_set(S))
    assert compose_rel(compose_rel(R, S), T) == compose_rel(R, compose_rel(S, T))


@given(chains())
def test_inverse_is_antihomomorphism(rs):
    R, S, _ = rs
    assert inverse_rel(compose_rel(R, S)) == compose_rel(inverse_rel(S), inverse_rel(R))


@given(rels())
def test_identity_is_two_sided_unit(R):
    assert compose_rel(R, id_rel(R.cod)) == R
    assert compose_rel(id_rel(R.dom), R) == R


def test_compose_rejects_mismatched_carriers():
    with pytest.raises(FinRelError):
        compose_rel(id_rel(C("A", 2)), id_rel(C("B", 2)))


def test_graph_composition_and_identity():
    X, Y, Z = C("X", 3), C("Y", 2), C("Z", 4)
    f = FinMap(X, Y, [1, 0, 1])
    g = FinMap(Y, Z, [3, 2])
    assert compose_rel(graph_rel(f), graph_rel(g)) == graph_rel(f.then(g))
    assert graph_rel(FinMap.identity(X)) == id_rel(X)
    assert id_rel(C("one", 1)).table.tolist() == [[True]]
    assert compose_rel(id_rel(X), id_rel(X)) == id_rel(X)
    assert is_equivalence(id_rel(X))


def test_per_left_of_graph_is_kernel():
    X, Y = C("X", 4), C("Y", 2)
    f = FinMap(X, Y, [0, 1, 0, 1])
    G = graph_rel(f)
    kernel = compose_rel(G, inverse_rel(G))
    assert as_set(kernel) == {(a, b) for a in range(4) for b in range(4) if a % 2 == b % 2}


def test_append_reverse_graph_relates_both_batched_forms():
    lists = [(), (0,), (1,), (0, 1), (1, 0), (0, 0), (1, 1)]
    batched = [(xs, ys) for xs in lists for ys in lists if len(xs) + len(ys) <= 2]
    B = Carrier.of("B", batched)
    L = Carrier.of("L", lists)
    G = graph_rel(FinMap.from_function(B, L, lambda i: L.index_of_value(oracles.append_reverse(B.value(i)))))
    assert G(B.index_of_value(((0,), (1,))), L.index_of_value((0, 1)))
    assert G(B.index_of_value(((), (1, 0))), L.index_of_value((0, 1)))
    inv = inverse_rel(G)
    for j, xs in enumerate(lists):
        expected = {i for i, q in enumerate(batched) if oracles.append_reverse(q) == xs}
        assert set(np.flatnonzero(inv.table[j]).tolist()) == expected


# -- zigzag and QERs ------------------------------------------------------


def test_zigzag_counterexample_is_the_missing_corner():
    R = Rel.from_pairs(C("X", 2), C("Y", 2), [(0, 0), (1, 0), (1, 1)])
    assert zigzag_counterexample(R) == (0, 0, 1, 1)
    assert not is_zigzag_complete(R)
    assert zigzag_counterexample(total_rel(C("X", 2), C("Y", 3))) is None


@settings(max_examples=300)
@given(rels())
def test_zigzag_counterexample_is_lexicographically_least(R):
    assert zigzag_counterexample(R) == oracles.zigzag_least(as_set(R), len(R.dom), len(R.cod))


@given(st.integers(0, 4), st.integers(1, 4), st.data())
def test_every_graph_is_zigzag_complete(n, m, data):
    table = data.draw(st.lists(st.integers(0, m - 1), min_size=n, max_size=n))
    assert is_zigzag_complete(graph_rel(FinMap(C("X", n), C("Y", m), table)))


def test_zigzag_is_closure_under_r_rinv_r_exhaustive():
    # zigzag-completeness is exactly R . R^-1 . R <= R; it implies both sides are PERs
    for n, m in itertools.product(range(4), repeat=2):
        X, Y = C("X", n), C("Y", m)
        for R in relations(X, Y):
            left = compose_rel(R, inverse_rel(R))
            right = compose_rel(inverse_rel(R), R)
            z = is_zigzag_complete(R)
            assert z == compose_rel(left, R).is_subrel(R), R.pairs()
            if z:
                assert is_per(left) and is_per(right), R.pairs()


def test_both_sides_equivalences_do_not_force_zigzag():
    # total relation whose two composites are full, yet (1, 1) is missing
    R = Rel.from_pairs(C("X", 2), C("Y", 2), [(0, 0), (0, 1), (1, 0)])
    left = compose_rel(R, inverse_rel(R))
    right = compose_rel(inverse_rel(R), R)
    assert is_equivalence(left) and is_equivalence(right)
    assert zigzag_counterexample(R) == (1, 0, 0, 1)


def test_check_qer_failures_in_order():
    X, Y = C("X", 2), C("Y", 2)
    with pytest.raises(NotAQer) as exc:
        check_qer(Rel.from_pairs(X, Y, []))
    assert exc.value.kind == "untotal" and exc.value.side == "left" and exc.value.witness == (0,)
    with pytest.raises(NotAQer) as exc:
        check_qer(Rel.from_pairs(X, Y, [(0, 0), (1, 0)]))
    assert exc.value.side == "right" and exc.value.witness == (1,)
    with pytest.raises(NotAQer) as exc:
        check_qer(Rel.from_pairs(X, Y, [(0, 0), (1, 0), (1, 1)]))
    assert exc.value.kind == "zigzag" and exc.value.witness == (0, 0, 1, 1)


def test_check_qer_choice_maps_are_least_partners():
    X, Y = C("X", 3), C("Y", 3)
    R = Rel.from_pairs(X, Y, [(0, 1), (0, 2), (1, 1), (1, 2), (2, 0)])
    w = check_qer(R)
    assert w.choice_lr.table.tolist() == [1, 1, 0]
    assert w.choice_rl.table.tolist() == [2, 0, 0]
    assert is_equivalence(w.per_left) and is_equivalence(w.per_right)


# -- quotients ------------------------------------------------------------


def test_quotient_by_total_has_one_class():
    X = C("X", 3)
    q = quotient(X, total_rel(X, X))
    assert len(q.carrier) == 1
    assert q.map.table.tolist() == [0, 0, 0]


def test_quotient_by_identity_is_bijective():
    X = C("X", 4)
    q = quotient(X, id_rel(X))
    assert len(q.carrier) == 4 and q.map.is_bijective()


def test_quotient_by_parity_kernel():
    X = C("X", 4)
    E = Rel.from_predicate(X, X, lambda a, b: a % 2 == b % 2)
    q = quotient(X, E)
    assert q.partition.representatives == (0, 1)
    assert q.map.table.tolist() == [0, 1, 0, 1]


def test_quotient_rejects_non_equivalence_with_location():
    X = C("X", 3)
    E = Rel.from_pairs(X, X, [(0, 0), (1, 1), (2, 2), (0, 1)])
    assert equivalence_violation(E) == ("symmetric", (0, 1))
    with pytest.raises(NotAnEquivalence, match="not symmetric"):
        quotient(X, E)


@settings(max_examples=200)
@given(st.integers(1, 5), st.data())
def test_quotient_is_effective(n, data):
    labels = data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    X = C("X", n)
    E = Rel.from_predicate(X, X, lambda a, b: labels[a] == labels[b])
    q = quotient(X, E)
    t = q.map.table
    assert np.array_equal(t[:, None] == t[None, :], E.table)
    reps = q.partition.representatives
    assert [min(c) for c in oracles.classes(set(E.pairs()), n)] == list(reps)


def test_equivalences_counts_are_bell_numbers():
    assert [len(equivalences(C("X", n))) for n in range(5)] == [1, 1, 2, 5, 15]


# -- the induced bijection ------------------------------------------------


def test_induced_equiv_of_bijection_graph():
    X, Y = C("X", 3), C("Y", 3)
    f = FinMap(X, Y, [2, 0, 1])
    e = induced_equiv(check_qer(graph_rel(f)))
    assert e.forward.table.tolist() == [2, 0, 1]


def test_induced_equiv_of_total_relation():
    X, Y = C("X", 2), C("Y", 3)
    e = induced_equiv(check_qer(total_rel(X, Y)))
    assert len(e.dom) == len(e.cod) == 1


def test_induced_equiv_append_reverse_small():
    letters = "ab"
    lists = [xs for n in range(3) for xs in itertools.product(letters, repeat=n)]
    batched = [
        (xs, ys)
        for n in range(3)
        for k in range(n + 1)
        for xs in itertools.product(letters, repeat=k)
        for ys in itertools.product(letters, repeat=n - k)
    ]
    L, B = Carrier.of("L", lists), Carrier.of("B", batched)
    f = FinMap.from_function(B, L, lambda i: L.index_of_value(oracles.append_reverse(B.value(i))))
    w = check_qer(graph_rel(f))
    e = induced_equiv(w)
    assert len(w.left_quotient.carrier) == 7 and len(w.right_quotient.carrier) == 7
    for x in range(len(B)):
        cls = w.left_quotient.map(x)
        assert e.forward(cls) == w.right_quotient.map(f(x))


def test_lemma_characterization_exhaustive_small():
    # every QER on carriers up to 2x3: e[x] = [y] exactly when R x y
    for n, m in [(1, 1), (2, 2), (2, 3), (3, 2)]:
        X, Y = C("X", n), C("Y", m)
        for R in relations(X, Y):
            try:
                w = check_qer(R)
            except NotAQer:
                continue
            e = induced_equiv(w)
            qx, qy = w.left_quotient.map.table, w.right_quotient.map.table
            got = e.forward.table[qx][:, None] == qy[None, :]
            assert np.array_equal(got, R.table)


def test_bijection_checks_inverse_laws():
    X = C("X", 2)
    with pytest.raises(FinRelError):
        Bijection(FinMap(X, X, [0, 0]), FinMap(X, X, [0, 1]))
    e = Bijection.from_map(FinMap(X, X, [1, 0]))
    assert e.inverse().forward.table.tolist() == [1, 0]
    assert e.then(e).forward.table.tolist() == [0, 1]


def test_empty_carriers_form_a_qer():
    E = C("E", 0)
    w = check_qer(Rel(E, E, np.zeros((0, 0), dtype=bool)))
    e = induced_equiv(w)
    assert len(e.dom) == len(e.cod) == 0
