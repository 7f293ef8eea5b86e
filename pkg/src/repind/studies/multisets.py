"""Finite multisets as lists and as association lists, counted modulo ``m``.

Both carriers are length-bounded. When a raw operation would produce a
value longer than the bound, the result is replaced by the canonical form
of its count vector: letters in alphabet order, each repeated ``count``
times for lists, and one ``(letter, count)`` entry per nonzero count for
association lists. Counts are always taken modulo ``m``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..descent import structured_qer_pipeline
from ..finrel import Bijection, Carrier, FinMap, Rel
from ..report import Report
from ..sip import (
    Formula,
    Observer,
    Signature,
    check_structured_equiv,
    eval_axiom,
    parse_formula,
    transfer_axioms,
)
from ..structure import ConstD, FunD, FunTable, StructuredInstance, X, component, project, prod, rel_check

LETTERS = "abcdefghij"
MULTISET_OPS = (("empty", "l"), ("insert", "rl"), ("union", "rrl"), ("count", "rrr"))


@dataclass(frozen=True)
class MultisetStudyConfig:
    alphabet: int = 2
    modulus: int = 2
    length: int = 3
    entries: int | None = None  # association-list length bound; defaults to the alphabet size

    def __post_init__(self):
        if self.alphabet < 1 or self.modulus < 2:
            raise ValueError("need a nonempty alphabet and modulus at least 2")
        if self.length < self.alphabet * (self.modulus - 1):
            raise ValueError(
                f"length bound {self.length} is below {self.alphabet * (self.modulus - 1)}, "
                "so canonical forms would not fit"
            )
        if self.entry_bound < self.alphabet:
            raise ValueError("association-list bound must be at least the alphabet size")

    @property
    def entry_bound(self) -> int:
        return self.alphabet if self.entries is None else self.entries

    @property
    def letters(self) -> str:
        return LETTERS[: self.alphabet]


FAST = MultisetStudyConfig(2, 2, 3)
FULL = MultisetStudyConfig(3, 3, 8)


def multiset_desc(A: Carrier, Z: Carrier):
    return prod(
        X,
        FunD(ConstD(A), FunD(X, X)),
        FunD(X, FunD(X, X)),
        FunD(ConstD(A), FunD(X, ConstD(Z))),
    )


def multiset_axioms() -> list[Formula]:
    return [
        parse_formula(
            "(forall ((x X) (y X) (z X)) (= (union (union x y) z) (union x (union y z))))", "union-assoc"
        ),
        parse_formula(
            "(forall ((a A) (b A) (x X)) (= (insert a (insert b x)) (insert b (insert a x))))", "insert-comm"
        ),
        parse_formula(
            "(forall ((a A) (x X)) (= (count a (insert a x)) (obs succ (count a x))))", "count-insert-eq"
        ),
        parse_formula(
            "(forall ((a A) (b A) (x X)) (implies ((!= a b)) (= (count a (insert b x)) (count a x))))",
            "count-insert-neq",
        ),
    ]


# -- count vectors ---------------------------------------------------------


def vectors(cfg: MultisetStudyConfig) -> list[tuple[int, ...]]:
    return list(itertools.product(range(cfg.modulus), repeat=cfg.alphabet))


def vector_code(v, m: int) -> int:
    code = 0
    for c in v:
        code = code * m + c
    return code


def show_vector(letters: str, v) -> str:
    return "{" + ", ".join(f"{a}: {c}" for a, c in zip(letters, v)) + "}"


# -- lists -----------------------------------------------------------------


def list_count(a: int, xs: tuple[int, ...], m: int) -> int:
    return sum(1 for x in xs if x == a) % m


def list_vector(xs, cfg) -> tuple[int, ...]:
    return tuple(list_count(a, xs, cfg.modulus) for a in range(cfg.alphabet))


def canonical_list(v) -> tuple[int, ...]:
    return tuple(a for a, c in enumerate(v) for _ in range(c))


def list_states(cfg) -> list[tuple[int, ...]]:
    out = []
    for n in range(cfg.length + 1):
        out.extend(itertools.product(range(cfg.alphabet), repeat=n))
    return out


def show_list(letters: str, xs) -> str:
    return "[" + ", ".join(letters[x] for x in xs) + "]"


# -- association lists -----------------------------------------------------


def insert_star(k: int, a: int, ys: tuple, m: int) -> tuple:
    """Add ``k`` to the first entry for ``a``, or append a new entry."""
    for i, (y, n) in enumerate(ys):
        if y == a:
            return ys[:i] + ((y, (k + n) % m),) + ys[i + 1 :]
    return ys + ((a, k % m),)


def al_union(xs: tuple, ys: tuple, m: int) -> tuple:
    out = ys
    for x, n in reversed(xs):
        out = insert_star(n, x, out, m)
    return out


def al_count(a: int, ys: tuple, m: int) -> int:
    return sum(n for y, n in ys if y == a) % m


def al_vector(ys, cfg) -> tuple[int, ...]:
    return tuple(al_count(a, ys, cfg.modulus) for a in range(cfg.alphabet))


def canonical_al(v) -> tuple:
    return tuple((a, c) for a, c in enumerate(v) if c)


def al_states(cfg) -> list[tuple]:
    entries = [(a, n) for a in range(cfg.alphabet) for n in range(cfg.modulus)]
    out = []
    for n in range(cfg.entry_bound + 1):
        out.extend(itertools.product(entries, repeat=n))
    return out


def show_al(letters: str, ys) -> str:
    return "[" + ", ".join(f"({letters[a]}, {n})" for a, n in ys) + "]"


# -- instances -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultisetStudy:
    config: MultisetStudyConfig
    A: Carrier
    Z: Carrier
    desc: object
    signature: Signature
    lists: StructuredInstance
    assoc: StructuredInstance
    relation: Rel
    list_vectors: np.ndarray  # count-vector code per list
    assoc_vectors: np.ndarray
    axioms: list[Formula]
    succ: Observer


def _index_dtype(n: int):
    return np.int16 if n < 2**15 else np.int32


def _list_instance(cfg, A, Z, D) -> tuple[StructuredInstance, np.ndarray]:
    m, n_a, L = cfg.modulus, cfg.alphabet, cfg.length
    states = list_states(cfg)
    C = Carrier("List", tuple(show_list(cfg.letters, s) for s in states), tuple(states))
    base = n_a + 1
    lengths = np.array([len(s) for s in states], dtype=np.int64)
    codes = np.array([sum((x + 1) * base ** (len(s) - 1 - k) for k, x in enumerate(s)) for s in states], dtype=np.int64)
    by_code = np.full(base ** (L + 1), -1, dtype=np.int64)
    by_code[codes] = np.arange(len(states))
    vecs = [list_vector(s, cfg) for s in states]
    vcode = np.array([vector_code(v, m) for v in vecs], dtype=np.int64)
    canon = np.array([C.index_of_value(canonical_list(v)) for v in vectors(cfg)], dtype=np.int64)
    digits = np.array(vecs, dtype=np.int64).reshape(len(states), n_a)
    weights = m ** np.arange(n_a - 1, -1, -1, dtype=np.int64)

    dt = _index_dtype(len(states))
    union = np.empty((len(states), len(states)), dtype=dt)
    pow_len = base**lengths
    for i in range(len(states)):
        fits = lengths[i] + lengths <= L
        joined = by_code[np.where(fits, codes[i] * pow_len + codes, 0)]
        summed = canon[((digits[i] + digits) % m) @ weights]
        union[i] = np.where(fits, joined, summed)
    insert = np.empty((n_a, len(states)), dtype=dt)
    for a in range(n_a):
        fits = lengths < L
        consed = by_code[np.where(fits, (a + 1) * pow_len + codes, 0)]
        bumped = digits.copy()
        bumped[:, a] = (bumped[:, a] + 1) % m
        insert[a] = np.where(fits, consed, canon[bumped @ weights])
    count = digits.T.copy()
    value = (C.index_of_value(()), (FunTable(insert), (FunTable(union), FunTable(count))))
    return StructuredInstance(C, D, value), vcode


def _al_instance(cfg, A, Z, D) -> tuple[StructuredInstance, np.ndarray]:
    m, n_a, bound = cfg.modulus, cfg.alphabet, cfg.entry_bound
    states = al_states(cfg)
    C = Carrier("AssocList", tuple(show_al(cfg.letters, s) for s in states), tuple(states))
    index = {s: i for i, s in enumerate(states)}
    vecs = [al_vector(s, cfg) for s in states]
    canon = {v: index[canonical_al(v)] for v in vectors(cfg)}

    def close(ys) -> int:
        return index[ys] if len(ys) <= bound else canon[al_vector(ys, cfg)]

    dt = _index_dtype(len(states))
    union = np.array([[close(al_union(xs, ys, m)) for ys in states] for xs in states], dtype=dt)
    union = union.reshape(len(states), len(states))
    insert = np.array([[close(insert_star(1, a, ys, m)) for ys in states] for a in range(n_a)], dtype=dt)
    count = np.array(vecs, dtype=np.int64).reshape(len(states), n_a).T.copy()
    vcode = np.array([vector_code(v, m) for v in vecs], dtype=np.int64)
    value = (index[()], (FunTable(insert), (FunTable(union), FunTable(count))))
    return StructuredInstance(C, D, value), vcode


def build_multiset_study(cfg: MultisetStudyConfig | None = None) -> MultisetStudy:
    cfg = cfg or FAST
    A = Carrier("A", tuple(cfg.letters), tuple(cfg.letters))
    Z = Carrier("Z", tuple(str(i) for i in range(cfg.modulus)), tuple(range(cfg.modulus)))
    D = multiset_desc(A, Z)
    lists, lv = _list_instance(cfg, A, Z, D)
    assoc, av = _al_instance(cfg, A, Z, D)
    R = Rel(lists.carrier, assoc.carrier, lv[:, None] == av[None, :])
    sig = Signature(D, MULTISET_OPS, (A, Z))
    succ = Observer("succ", FinMap.from_function(Z, Z, lambda i: (i + 1) % cfg.modulus))
    return MultisetStudy(cfg, A, Z, D, sig, lists, assoc, R, lv, av, multiset_axioms(), succ)


def multiset_oracle(cfg: MultisetStudyConfig | None = None) -> StructuredInstance:
    """Count vectors ``A -> Z/m`` with pointwise operations."""
    cfg = cfg or FAST
    m, n_a = cfg.modulus, cfg.alphabet
    A = Carrier("A", tuple(cfg.letters), tuple(cfg.letters))
    Z = Carrier("Z", tuple(str(i) for i in range(m)), tuple(range(m)))
    vs = vectors(cfg)
    C = Carrier("A->Z", tuple(show_vector(cfg.letters, v) for v in vs), tuple(vs))
    digits = np.array(vs, dtype=np.int64).reshape(len(vs), n_a)
    weights = m ** np.arange(n_a - 1, -1, -1, dtype=np.int64)
    union = (((digits[:, None, :] + digits[None, :, :]) % m) @ weights).astype(np.int64)
    insert = np.empty((n_a, len(vs)), dtype=np.int64)
    for a in range(n_a):
        bumped = digits.copy()
        bumped[:, a] = (bumped[:, a] + 1) % m
        insert[a] = bumped @ weights
    value = (0, (FunTable(insert), (FunTable(union), FunTable(digits.T.copy()))))
    return StructuredInstance(C, multiset_desc(A, Z), value)


def oracle_bijection(quotient: StructuredInstance, vcodes: np.ndarray, oracle: StructuredInstance, reps) -> Bijection:
    """Send each class to the count vector of its representative."""
    fwd = FinMap(quotient.carrier, oracle.carrier, vcodes[np.asarray(reps, dtype=np.int64)])
    return Bijection.from_map(fwd)


STRUCTURE_CONDITIONS = (("empty", "l"), ("count", "rrr"), ("insert", "rl"), ("union", "rrl"))


def run(alphabet: int = 2, modulus: int = 2, length: int = 3, entries: int | None = None, full: bool = False) -> Report:
    if full:
        cfg = FULL
    else:
        cfg = MultisetStudyConfig(int(alphabet), int(modulus), int(length), None if entries is None else int(entries))
    st = build_multiset_study(cfg)
    rep = Report(
        "case-study",
        "multisets",
        {"alphabet": cfg.alphabet, "modulus": cfg.modulus, "length": cfg.length, "entries": cfg.entry_bound},
    )
    rep.sections["carrier sizes"] = {"list": len(st.lists.carrier), "assoc": len(st.assoc.carrier)}
    D, R = st.desc, st.relation
    for name, path in STRUCTURE_CONDITIONS:
        bad = rel_check(component(D, path), R, project(st.lists.value, path), project(st.assoc.value, path))
        rep.check(f"relation preserves {name}", bad is None, None if bad is None else str(bad))

    obs = {"succ": st.succ}
    sig = st.signature
    raw = {
        "list": [eval_axiom(F, sig, st.lists, obs) for F in st.axioms],
        "assoc": [eval_axiom(F, sig, st.assoc, obs) for F in st.axioms],
    }
    rep.sections["raw axioms"] = {side: [r.describe() for r in rs] for side, rs in raw.items()}
    for side in ("list", "assoc"):
        for r in raw[side][:2]:
            rep.check(f"raw {side} {r.name} fails", not r.holds, None if r.holds else dict(r.counterexample))
        for r in raw[side][2:]:
            rep.check(f"raw {side} {r.name} holds", r.holds)

    res = structured_qer_pipeline(D, st.lists, st.assoc, R)
    expected = cfg.modulus**cfg.alphabet
    nl, na = len(res.left_quotient.carrier), len(res.right_quotient.carrier)
    rep.sections["quotient sizes"] = {"list": nl, "assoc": na, "oracle": expected}
    rep.check("quotient sizes match the count-vector oracle", nl == na == expected)
    rep.check("pipeline witnesses checked", res.cross_witness_checked and res.relation_identity)

    oracle = multiset_oracle(cfg)
    for side, inst, vc, quo in (
        ("list", res.left_quotient, st.list_vectors, res.qer.left_quotient),
        ("assoc", res.right_quotient, st.assoc_vectors, res.qer.right_quotient),
    ):
        e = oracle_bijection(inst, vc, oracle, quo.partition.representatives)
        bad = check_structured_equiv(D, e, inst.value, oracle.value)
        rep.check(f"{side} quotient is isomorphic to the oracle", bad is None, None if bad is None else str(bad))

    quo = {
        "list": [eval_axiom(F, sig, res.left_quotient, obs) for F in st.axioms],
        "assoc": [eval_axiom(F, sig, res.right_quotient, obs) for F in st.axioms],
    }
    rep.sections["quotient axioms"] = {side: [r.describe() for r in rs] for side, rs in quo.items()}
    rep.check("quotients satisfy every axiom", all(r.holds for rs in quo.values() for r in rs))
    tr = transfer_axioms(st.axioms, sig, res.equiv, res.left_quotient, res.right_quotient, obs)
    rep.check("axioms transfer from list quotient to assoc quotient", tr.ok)
    rep.check(
        "transferred verdicts match direct verification",
        all(r.right.holds == d.holds for r, d in zip(tr.rows, quo["assoc"])),
    )
    return rep


def build_spec(cfg: MultisetStudyConfig | None = None):
    """The study as a spec file: lists on the left, association lists on the right."""
    from ..specfile import spec_from_instances

    st = build_multiset_study(cfg)
    return spec_from_instances(
        st.lists, st.assoc, st.relation, tuple(op for op, _ in MULTISET_OPS), (st.A, st.Z),
        st.axioms, {"succ": st.succ}, {"succ": st.succ},
    )
