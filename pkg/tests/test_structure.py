from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

import oracles
from helpers import CONSTS, D, K2, to_oracle_desc, to_oracle_value
from repind.finrel import Bijection, Carrier, FinMap, Rel, graph_rel, id_rel, quotient, relations
from repind.structure import (
    CapExceeded,
    ConstD,
    FunD,
    FunTable,
    Just,
    MaybeD,
    NotAdmissible,
    ProdD,
    StructureError,
    X,
    act_value,
    apply,
    code_value,
    decode,
    depth,
    equiv_action,
    equiv_check,
    equiv_holds,
    equiv_lift,
    fun_action,
    function_equiv_str_plus,
    generate_descs,
    interpret,
    is_admissible,
    is_positive,
    maybe_equiv_str_prime,
    parse_desc,
    rel_check,
    rel_holds,
    rel_map_witness,
    rel_table,
    render,
    size,
    tabulate,
    value_code,
)

SMALL = [
    "X",
    "const(K)",
    "prod(X,X)",
    "maybe(X)",
    "fun(X,X)",
    "fun(const(K),X)",
    "fun(X,const(K))",
    "prod(X,maybe(const(K)))",
    "fun(X,fun(X,X))",
    "fun(maybe(X),X)",
    "fun(prod(X,X),X)",
    "maybe(fun(X,X))",
    "fun(X,maybe(X))",
    "prod(fun(X,X),X)",
]


# -- parsing and shape ------------------------------------------------------


def test_parse_and_str_round_trip():
    for text in SMALL:
        assert str(D(text)) == text
    assert D(" fun( X , maybe(X) ) ") == FunD(X, MaybeD(X))


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("fun(X", "expected ','"),
        ("const(Q)", "unknown constant carrier 'Q'"),
        ("prod(X,X) X", "trailing input"),
        ("list(X)", "unexpected 'list'"),
        ("", "unexpected end"),
        ("X$", "unexpected character '$'"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(StructureError, match=fragment.replace("(", r"\(").replace("$", r"\$")):
        D(text)


def test_positivity_and_admissibility():
    assert is_positive(D("prod(X,maybe(const(K)))"))
    assert not is_positive(D("fun(X,X)"))
    assert is_admissible(D("fun(prod(X,X),fun(X,X))"))
    assert not is_admissible(D("fun(fun(X,X),X)"))
    with pytest.raises(NotAdmissible):
        rel_table(D("fun(fun(X,X),X)"), id_rel(Carrier.range("A", 2)))


def test_sizes():
    C = Carrier.range("A", 3)
    assert size(D("fun(X,fun(X,X))"), C) == 3 ** 9
    assert size(D("maybe(prod(X,const(K)))"), C) == 7
    assert size(D("fun(X,X)"), Carrier.range("E", 0)) == 1


def test_interpret_respects_cap():
    C = Carrier.range("A", 3)
    with pytest.raises(CapExceeded) as info:
        interpret(D("maybe(fun(prod(X,X),X))"), C, cap=1000)
    assert "fun(prod(X,X),X)" in str(info.value)


# -- enumeration against the oracle -----------------------------------------


@pytest.mark.parametrize("text", SMALL)
@pytest.mark.parametrize("n", [0, 1, 2])
def test_enumeration_order_matches_oracle(text, n):
    d = D(text)
    C = Carrier.range("A", n)
    space = interpret(d, C)
    assert [to_oracle_value(d, C, v) for v in space.values] == oracles.enum(to_oracle_desc(d), n)
    assert len(set(space.carrier.labels)) == len(space)


@pytest.mark.parametrize("text", [t for t in SMALL if not t.startswith("fun")])
def test_value_codes_are_enumeration_indices(text):
    d = D(text)
    C = Carrier.range("A", 3)
    for i, v in enumerate(interpret(d, C).values):
        assert value_code(d, C, v) == i
        assert code_value(d, C, i) == v


def test_apply_and_tabulate():
    F = D("fun(X,fun(X,X))")
    C = Carrier.range("A", 3)
    add = tabulate(F, C, lambda a: tabulate(FunD(X, X), C, lambda b: (a + b) % 3))
    assert add.data.shape == (3, 3)
    for a, b in itertools.product(range(3), repeat=2):
        assert apply(FunD(X, X), C, apply(F, C, add, a), b) == (a + b) % 3
    assert add in interpret(F, C).index


def test_render():
    C = Carrier.of("A", ["p", "q"])
    assert render(D("prod(X,maybe(const(K)))"), C, (1, Just(0))) == "(q, just u)"
    assert render(D("fun(X,X)"), C, FunTable(np.array([1, 0]))) == "{p: q, q: p}"


# -- relation lifting against the oracle ------------------------------------


def _oracle_table(d, R):
    n, m = len(R.dom), len(R.cod)
    pairs = set(R.pairs())
    od = to_oracle_desc(d)
    left, right = oracles.enum(od, n), oracles.enum(od, m)
    return np.array([[oracles.rho(od, pairs, n, m, s, t) for t in right] for s in left], dtype=bool).reshape(
        len(left), len(right)
    )


@pytest.mark.parametrize("text", SMALL)
@pytest.mark.parametrize("shape_", [(1, 2), (2, 1), (2, 2)])
def test_rel_table_matches_oracle_exhaustive(text, shape_):
    d = D(text)
    A, B = Carrier.range("A", shape_[0]), Carrier.range("B", shape_[1])
    for R in relations(A, B):
        assert np.array_equal(rel_table(d, R), _oracle_table(d, R)), R.pairs()


@pytest.mark.parametrize("text", ["fun(X,X)", "prod(X,maybe(X))", "fun(maybe(X),X)"])
def test_rel_table_matches_oracle_sampled_three(text):
    d = D(text)
    rng = random.Random(7)
    A, B = Carrier.range("A", 3), Carrier.range("B", 2)
    for _ in range(12):
        R = Rel.from_predicate(A, B, lambda x, y: rng.random() < 0.5)
        assert np.array_equal(rel_table(d, R), _oracle_table(d, R))


@pytest.mark.parametrize("text", ["fun(X,X)", "fun(prod(X,X),X)", "prod(fun(X,X),X)", "fun(X,maybe(X))"])
def test_single_pair_methods_agree_with_table(text):
    d = D(text)
    A, B = Carrier.range("A", 2), Carrier.range("B", 2)
    for R in relations(A, B):
        table = rel_table(d, R)
        a, b = interpret(d, A).values, interpret(d, B).values
        for i, j in itertools.product(range(len(a)), range(len(b))):
            assert rel_holds(d, R, a[i], b[j], method="pairs") == table[i, j]
            if R.zigzag_labels is not None:
                assert rel_holds(d, R, a[i], b[j], method="labels") == table[i, j]


def test_mismatch_names_the_argument():
    A = Carrier.of("A", ["p", "q"])
    R = id_rel(A)
    f = FunTable(np.array([0, 1]))
    g = FunTable(np.array([0, 0]))
    bad = rel_check(D("fun(X,X)"), R, f, g)
    assert bad is not None
    assert str(bad) == "at arg q ~ q: q vs p"


# -- equivalence lifting and actions ----------------------------------------


def _perms(n):
    A = Carrier.range("A", n)
    for p in itertools.permutations(range(n)):
        yield list(p), Bijection.from_map(FinMap(A, A, np.array(p, dtype=np.int64)))


@pytest.mark.parametrize("text", SMALL)
def test_equiv_lift_and_action_match_oracle(text):
    d = D(text)
    od = to_oracle_desc(d)
    n = 2 if text in ("fun(X,fun(X,X))", "fun(prod(X,X),X)") else 3
    for p, e in _perms(n):
        vals = interpret(d, e.dom).values
        ovals = oracles.enum(od, n)
        expect = np.array(
            [[oracles.iota(od, p, n, s, t) for t in ovals] for s in ovals], dtype=bool
        ).reshape(len(ovals), len(ovals))
        assert np.array_equal(equiv_lift(d, e).table, expect)
        for v in vals:
            assert to_oracle_value(d, e.cod, act_value(d, e, v)) == oracles.act(od, p, n, to_oracle_value(d, e.dom, v))
        act = equiv_action(d, e)
        assert act.forward.is_bijective()
        # the lifted equivalence is the graph of the action
        assert np.array_equal(graph_rel(act.forward).table, expect)


def test_iota_with_boolean_not():
    B = Carrier.of("Bool", ["false", "true"])
    neg = Bijection.from_map(FinMap(B, B, np.array([1, 0])))
    d = D("fun(X,X)")
    ident = FunTable(np.array([0, 1]))
    const_false = FunTable(np.array([0, 0]))
    const_true = FunTable(np.array([1, 1]))
    assert equiv_holds(d, neg, ident, ident)
    assert equiv_holds(d, neg, const_false, const_true)
    assert not equiv_holds(d, neg, const_false, const_false)
    assert equiv_check(d, neg, const_false, const_false) is not None


def test_function_equiv_forms_agree():
    for n in range(0, 3):
        for text in ["fun(X,X)", "fun(X,maybe(X))", "fun(prod(X,X),X)", "fun(X,fun(X,X))"]:
            d = D(text)
            for _, e in _perms(n):
                vals = interpret(d, e.dom).values
                for f in vals:
                    for g in vals:
                        assert function_equiv_str_plus(d, e, f, g) == equiv_holds(d, e, f, g)


def test_maybe_equiv_forms_agree():
    for text in ["maybe(X)", "maybe(prod(X,const(K)))", "maybe(fun(X,X))"]:
        d = D(text)
        for _, e in _perms(3):
            vals = interpret(d, e.dom).values
            for s in vals:
                for t in vals:
                    assert maybe_equiv_str_prime(d, e, s, t) == equiv_holds(d, e, s, t)


def test_fun_action_on_positive_descriptions():
    A, B = Carrier.range("A", 3), Carrier.range("B", 2)
    f = FinMap(A, B, np.array([1, 0, 1]))
    d = D("prod(X,maybe(X))")
    F = fun_action(d, f)
    for i, (x, m) in enumerate(interpret(d, A).values):
        image = interpret(d, B).values[F.table[i]]
        assert image == (f(x), None if m is None else Just(f(m.value)))
    with pytest.raises(StructureError):
        fun_action(D("fun(X,X)"), f)


def test_rel_map_witness_through_a_quotient():
    A = Carrier.range("A", 4)
    E = Rel.from_predicate(A, A, lambda x, y: x % 2 == y % 2)
    q = quotient(A, E).map
    Q = q.cod
    for text in ["X", "prod(X,X)", "maybe(prod(X,const(K)))"]:
        assert rel_map_witness(D(text), q, q, E, id_rel(Q)) is None
    with pytest.raises(StructureError, match="precondition"):
        rel_map_witness(D("X"), q, q, Rel.from_predicate(A, A, lambda x, y: True), id_rel(Q))


# -- generated descriptions --------------------------------------------------


def _oracle_descs(max_depth, n_consts):
    base = [oracles.X] + [("K", i) for i in range(n_consts)]
    levels = [set(base)]
    for _ in range(1, max_depth):
        prev = set().union(*levels)
        new = set(prev)
        for a in prev:
            new.add(oracles.Maybe(a))
            for b in prev:
                new.add(oracles.Prod(a, b))
                new.add(oracles.Fun(a, b))
        levels.append(new)
    return levels[-1]


def _oracle_positive(d):
    if d[0] in ("X", "K"):
        return True
    if d[0] == "fun":
        return False
    return all(_oracle_positive(c) for c in d[1:])


def _oracle_admissible(d):
    if d[0] in ("X", "K"):
        return True
    if d[0] == "fun" and not _oracle_positive(d[1]):
        return False
    return all(_oracle_admissible(c) for c in d[1:])


def _tag(d):
    if d == X:
        return ("X",)
    if isinstance(d, ConstD):
        return ("K", 0)
    if isinstance(d, ProdD):
        return ("prod", _tag(d.left), _tag(d.right))
    if isinstance(d, FunD):
        return ("fun", _tag(d.domain), _tag(d.codomain))
    return ("maybe", _tag(d.inner))


def test_generated_descs_match_brute_force():
    got = generate_descs(3, (K2,))
    expect = {d for d in _oracle_descs(3, 1) if _oracle_admissible(d)}
    assert len(got) == len(expect) == 254
    assert {_tag(d) for d in got} == expect
    assert all(depth(d) <= 3 and is_admissible(d) for d in got)
    assert len(generate_descs(3, (K2,), admissible_only=False)) == len(_oracle_descs(3, 1))


def test_generated_descs_parse_back():
    for d in generate_descs(3, (K2,)):
        assert D(str(d)) == d
