"""Matrices as functions on indices versus nested vectors."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..finrel import Bijection, Carrier, FinMap
from ..report import Report
from ..sip import (
    Signature,
    check_structured_equiv,
    parse_formula,
    replace_goal,
    transfer_axioms,
)
from ..structure import ConstD, FunD, FunTable, StructuredInstance, X, act_value, interpret, prod

MATRIX_OPS = (("zero", "l"), ("add", "rl"), ("neg", "rr"))


@dataclass(frozen=True)
class MatrixStudyConfig:
    rows: int = 2
    cols: int = 2
    modulus: int = 5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.modulus < 1:
            raise ValueError("dimensions and modulus must be positive")
        if self.modulus ** (self.rows * self.cols) > 10_000:
            raise ValueError("too many matrices to enumerate")


def matrix_desc():
    return prod(X, FunD(X, FunD(X, X)), FunD(X, X))


def group_axioms():
    return [
        parse_formula("(forall ((a X) (b X) (c X)) (= (add (add a b) c) (add a (add b c))))", "add-assoc"),
        parse_formula("(forall ((a X) (b X)) (= (add a b) (add b a)))", "add-comm"),
        parse_formula("(forall ((a X)) (= (add zero a) a))", "add-unit"),
        parse_formula("(forall ((a X)) (= (add a (neg a)) zero))", "add-inverse"),
    ]


def fin_carrier(cfg: MatrixStudyConfig) -> Carrier:
    """All tables ``Fin rows -> Fin cols -> Z/k`` in canonical order."""
    I = Carrier.range("Fin" + str(cfg.rows), cfg.rows)
    J = Carrier.range("Fin" + str(cfg.cols), cfg.cols)
    K = Carrier.range("Z" + str(cfg.modulus), cfg.modulus)
    space = interpret(FunD(ConstD(I), FunD(ConstD(J), ConstD(K))), Carrier.range("unit", 0))
    return Carrier("FinMatrix", space.carrier.labels, space.values)


def vec_carrier(cfg: MatrixStudyConfig) -> Carrier:
    entries = range(cfg.modulus)
    rows = list(itertools.product(entries, repeat=cfg.cols))
    mats = list(itertools.product(rows, repeat=cfg.rows))
    return Carrier("VecMatrix", tuple(show_vec(m) for m in mats), tuple(mats))


def show_vec(m) -> str:
    return "[" + ", ".join("[" + ", ".join(str(x) for x in row) + "]" for row in m) + "]"


def add_fin(M: FunTable, N: FunTable, k: int) -> FunTable:
    return FunTable((M.data + N.data) % k)


def neg_fin(M: FunTable, k: int) -> FunTable:
    return FunTable((-M.data) % k)


def add_vec(M, N, k: int):
    return tuple(tuple((a + b) % k for a, b in zip(r, s)) for r, s in zip(M, N))


def neg_vec(M, k: int):
    return tuple(tuple((-a) % k for a in r) for r in M)


def fin_to_vec(M: FunTable):
    return tuple(tuple(int(x) for x in row) for row in M.data)


def _entries(C: Carrier, to_vec) -> np.ndarray:
    return np.array([to_vec(v) for v in C.values], dtype=np.int64)


def _instance(C: Carrier, E: np.ndarray, k: int) -> StructuredInstance:
    """Entrywise zero/add/neg tables, given each element's entries ``E``."""
    n = len(C)
    weights = k ** np.arange(E[0].size, dtype=np.int64)[::-1]
    lookup = np.empty(k ** E[0].size, dtype=np.int64)
    lookup[E.reshape(n, -1) @ weights] = np.arange(n)
    flat = E.reshape(n, -1)
    add_t = lookup[((flat[:, None, :] + flat[None, :, :]) % k) @ weights]
    neg_t = lookup[((-flat) % k) @ weights]
    return StructuredInstance(C, matrix_desc(), (int(lookup[0]), (FunTable(add_t), FunTable(neg_t))))


@dataclass(frozen=True, eq=False)
class MatrixStudy:
    config: MatrixStudyConfig
    signature: Signature
    fin: StructuredInstance
    vec: StructuredInstance
    equiv: Bijection


def build_matrix_study(cfg: MatrixStudyConfig | None = None) -> MatrixStudy:
    cfg = cfg or MatrixStudyConfig()
    k = cfg.modulus
    F, V = fin_carrier(cfg), vec_carrier(cfg)
    fin = _instance(F, _entries(F, fin_to_vec), k)
    vec = _instance(V, _entries(V, lambda m: m), k)
    e = Bijection.from_map(FinMap.from_function(F, V, lambda i: V.index_of_value(fin_to_vec(F.value(i)))))
    return MatrixStudy(cfg, Signature(matrix_desc(), MATRIX_OPS), fin, vec, e)


def add_vec_table(st: MatrixStudy) -> np.ndarray:
    """addVecMatrix tabulated with plain tuple arithmetic."""
    V, k = st.vec.carrier, st.config.modulus
    index = {m: i for i, m in enumerate(V.values)}
    return np.array([[index[add_vec(a, b, k)] for b in V.values] for a in V.values], dtype=np.int64)


def differing_entry(a, b) -> str:
    for i, (r, s) in enumerate(zip(a, b)):
        for j, (x, y) in enumerate(zip(r, s)):
            if x != y:
                return f"entry ({i}, {j}): {x} vs {y}"
    return "no difference"


def run(rows: int = 2, cols: int = 2, modulus: int = 5) -> Report:
    cfg = MatrixStudyConfig(int(rows), int(cols), int(modulus))
    st = build_matrix_study(cfg)
    rep = Report("case-study", "matrices", {"rows": cfg.rows, "cols": cfg.cols, "modulus": cfg.modulus})
    D, e = matrix_desc(), st.equiv
    rep.sections["carrier size"] = len(st.fin.carrier)
    bad = check_structured_equiv(D, e, st.fin.value, st.vec.value)
    rep.check("index/vector bijection preserves zero, add and neg", bad is None, None if bad is None else str(bad))

    moved = act_value(D, e, st.fin.value)
    rep.check("transported addition equals addVecMatrix", np.array_equal(moved[1][0].data, add_vec_table(st)))
    rep.check("transported structure equals the vector structure", moved == st.vec.value)

    sig, axioms = st.signature, group_axioms()
    tr = transfer_axioms(axioms, sig, e, st.fin, st.vec)
    rep.check("group axioms transfer to vectors", tr.ok)
    rep.check("transferred verdicts match direct verification", all(r.agree for r in tr.rows))

    if cfg.rows == cfg.cols:
        F = st.fin.carrier
        n = cfg.rows
        M = FunTable(np.eye(n, dtype=np.int64))
        N = FunTable(1 - np.eye(n, dtype=np.int64))
        MN = F.index_of_value(add_fin(M, N, cfg.modulus))
        ones = F.index_of_value(FunTable(np.ones((n, n), dtype=np.int64)))
        goal = replace_goal(e, MN, ones, differing_entry)
        rep.sections["replace goal"] = {"lhs image": goal.left_image, "rhs image": goal.right_image}
        rep.check("M + N equals the all-ones matrix via the bijection", goal.equal)
    return rep
