"""Descent of structures to quotients, property suites, and the QER pipeline."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .finrel import (
    Bijection,
    Carrier,
    CarrierMismatch,
    FinMap,
    FinRelError,
    NotAnEquivalence,
    QerWitness,
    Quotient,
    Rel,
    SoundnessError,
    check_qer,
    compose_rel,
    equivalence_violation,
    equivalences,
    graph_rel,
    id_rel,
    induced_equiv,
    inverse_rel,
    quotient,
    relations,
)
from .structure import (
    DEFAULT_CAP,
    ConstD,
    Desc,
    FunD,
    FunTable,
    Just,
    MaybeD,
    Mismatch,
    ProdD,
    StructuredInstance,
    VarD,
    decode,
    encode,
    equiv_check,
    fun_action,
    interpret,
    is_positive,
    rel_check,
    rel_table,
    render,
    require_admissible,
    shape,
    size,
)


class DescentError(FinRelError):
    """``kind`` is ``precondition``, ``representative`` or ``uniqueness``."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class NotStructured(FinRelError):
    def __init__(self, mismatch: Mismatch):
        super().__init__(f"relation is not structured: {mismatch}")
        self.mismatch = mismatch


@dataclass(frozen=True, eq=False)
class DescentResult:
    quotient_instance: StructuredInstance
    graph_witness_checked: bool
    representative_trace: dict[str, tuple[tuple[str, str], ...]]
    uniqueness: str  # "full", "factored" or "skipped"
    quotient: Quotient


# -- descent ---------------------------------------------------------------


def descend(
    D: Desc,
    E: Rel,
    s: Any,
    uniqueness: str = "auto",
    q: Quotient | None = None,
    cap: int = DEFAULT_CAP,
) -> DescentResult:
    """Push a self-related value down to the quotient ``X/E``.

    ``uniqueness`` selects the contractibility check: ``"full"`` scans every
    candidate in the quotient interpretation, ``"factored"`` checks the
    candidate set componentwise (exact, and feasible where the full space is
    astronomically large), ``"auto"`` uses ``full`` when the space fits under
    ``cap``.
    """
    require_admissible(D)
    X = E.dom
    if q is None:
        q = quotient(X, E)
    bad = rel_check(D, E, s, s)
    if bad is not None:
        raise DescentError("precondition", f"value is not related to itself: {bad}")
    trace: dict[str, dict[str, str]] = {}
    sbar = _descend(D, q, s, trace)
    G = graph_rel(q.map)
    bad = rel_check(D, G, s, sbar)
    if bad is not None:
        raise SoundnessError(f"descended value is not graph-related to its source: {bad}")
    if uniqueness == "auto":
        uniqueness = "full" if size(D, q.carrier) <= cap else "factored"
    if uniqueness == "full":
        _unique_full(D, G, s, sbar, cap)
    elif uniqueness == "factored":
        if not _unique_factored(D, G, s, sbar, cap):
            raise DescentError("uniqueness", f"more than one candidate for {D}")
    elif uniqueness != "skipped":
        raise ValueError(f"unknown uniqueness mode {uniqueness!r}")
    frozen_trace = {k: tuple(sorted(v.items(), key=lambda kv: kv[0])) for k, v in trace.items()}
    return DescentResult(StructuredInstance(q.carrier, D, sbar), True, frozen_trace, uniqueness, q)


def _preimages(P: Desc, q: Quotient) -> np.ndarray:
    """Least-index preimage of each quotient-side ``P``-value."""
    fa = fun_action(P, q.map).table
    n_bar = len(interpret(P, q.carrier))
    values, first = np.unique(fa, return_index=True)
    pre = np.full(n_bar, -1, dtype=np.int64)
    pre[values] = first
    if (pre < 0).any():
        missing = interpret(P, q.carrier).carrier.label(int(np.argmin(pre)))
        raise DescentError("representative", f"no preimage for {missing} in {P}")
    return pre


def _descend(D: Desc, q: Quotient, v: Any, trace: dict) -> Any:
    if isinstance(D, VarD):
        return q.map(v)
    if isinstance(D, ConstD):
        return v
    if isinstance(D, ProdD):
        return (_descend(D.left, q, v[0], trace), _descend(D.right, q, v[1], trace))
    if isinstance(D, MaybeD):
        return None if v is None else Just(_descend(D.inner, q, v.value, trace))
    X, Xbar = q.map.dom, q.carrier
    pre = _preimages(D.domain, q)
    log = trace.setdefault(str(D), {})
    if len(log) < len(pre):
        dom_x, dom_bar = interpret(D.domain, X).carrier, interpret(D.domain, Xbar).carrier
        for j, i in enumerate(pre):
            log.setdefault(dom_bar.label(j), dom_x.label(int(i)))
    T = D.codomain
    picked = v.data[pre]
    if isinstance(T, VarD):
        return FunTable(q.map.table[picked])
    if isinstance(T, ConstD):
        return FunTable(picked)
    codes = [encode(T, Xbar, _descend(T, q, decode(T, X, c), trace)) for c in picked]
    if isinstance(T, FunD):
        return FunTable(np.stack(codes) if codes else np.zeros((0,) + shape(T, Xbar), np.int64))
    return FunTable(np.array(codes, dtype=np.int64))


def _unique_full(D: Desc, G: Rel, s: Any, sbar: Any, cap: int) -> None:
    X, Xbar = G.dom, G.cod
    space_bar = interpret(D, Xbar, cap)
    if size(D, X) <= cap:
        row = rel_table(D, G, cap)[interpret(D, X, cap).index[s]]
        hits = np.flatnonzero(row)
    else:
        hits = [j for j, v in enumerate(space_bar.values) if rel_check(D, G, s, v) is None]
    if len(hits) != 1 or space_bar.values[hits[0]] != sbar:
        shown = ", ".join(space_bar.carrier.label(int(j)) for j in hits[:3])
        raise DescentError("uniqueness", f"{len(hits)} candidates for {D} (first: {shown})")


def _unique_factored(D: Desc, G: Rel, s: Any, sbar: Any, cap: int) -> bool:
    """Is ``sbar`` the only value graph-related to ``s``?

    The candidate set of a product is the product of candidate sets, and
    that of a function is the product over quotient points of the
    intersection of candidate sets over related source points.
    """
    if isinstance(D, (VarD, ConstD)):
        return True
    if isinstance(D, ProdD):
        return _unique_factored(D.left, G, s[0], sbar[0], cap) and _unique_factored(
            D.right, G, s[1], sbar[1], cap
        )
    if isinstance(D, MaybeD):
        return s is None or _unique_factored(D.inner, G, s.value, sbar.value, cap)
    X, Xbar = G.dom, G.cod
    P, T = D.domain, D.codomain
    related = rel_table(P, G, cap)
    for j in range(related.shape[1]):
        sources = np.flatnonzero(related[:, j])
        if not len(sources):
            if size(T, Xbar) != 1:
                return False
            continue
        target = decode(T, Xbar, sbar.data[j])
        if any(_unique_factored(T, G, decode(T, X, s.data[i]), target, cap) for i in sources[:4]):
            continue
        cands = [
            w
            for w in interpret(T, Xbar, cap).values
            if all(rel_check(T, G, decode(T, X, s.data[i]), w) is None for i in sources)
        ]
        if cands != [target]:
            return False
    return True


# -- factorization through the quotient condition --------------------------


@dataclass(frozen=True, eq=False)
class QuotientConditionMap:
    map: FinMap
    bijective: bool
    well_defined: bool


def quotient_condition_map(P: Desc, E: Rel) -> QuotientConditionMap:
    """The action of the quotient map, factored through the lifted quotient."""
    if not is_positive(P):
        raise DescentError("precondition", f"{P} is not positive")
    X = E.dom
    q = quotient(X, E)
    lifted = Rel(interpret(P, X).carrier, interpret(P, X).carrier, rel_table(P, E))
    qP = quotient(lifted.dom, lifted)
    fa = fun_action(P, q.map).table
    reps = np.array(qP.partition.representatives, dtype=np.int64)
    factored = fa[reps] if len(reps) else np.zeros(0, dtype=np.int64)
    well_defined = bool(np.array_equal(fa, factored[qP.map.table]))
    m = FinMap(qP.carrier, interpret(P, q.carrier).carrier, factored)
    return QuotientConditionMap(m, well_defined and m.is_bijective(), well_defined)


def factorization_agrees(D: FunD, E: Rel, s: FunTable, sbar: FunTable) -> bool:
    """Every member of each lifted-quotient class yields the descended entry.

    This rebuilds the descended function through the factorization above
    (using all class members rather than the least preimage) and compares.
    """
    X = E.dom
    q = quotient(X, E)
    qcm = quotient_condition_map(D.domain, E)
    if not qcm.bijective:
        return False
    lifted = Rel(interpret(D.domain, X).carrier, interpret(D.domain, X).carrier, rel_table(D.domain, E))
    cls = quotient(lifted.dom, lifted).map.table
    T = D.codomain
    for i in range(len(cls)):
        j = int(qcm.map.table[cls[i]])
        got = _descend(T, q, decode(T, X, s.data[i]), {})
        if got != decode(T, q.carrier, sbar.data[j]):
            return False
    return True


# -- property suites -------------------------------------------------------


@dataclass
class ClauseResult:
    name: str
    status: str  # pass | fail | trivial | skipped
    checked: int = 0
    counterexample: str | None = None
    note: str | None = None

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "trivial", "skipped")


@dataclass
class SuiteReport:
    suite: str
    desc: str
    clauses: list[ClauseResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.clauses)

    @property
    def skipped(self) -> list[ClauseResult]:
        return [c for c in self.clauses if c.status == "skipped" or c.note]


@dataclass(frozen=True)
class SuiteConfig:
    exhaustive_size: int = 2
    sample_size: int = 3
    samples: int = 200
    seed: int = 0
    table_cap: int = 729  # largest interpretation handled with full tables


Lift = Callable[[Desc, Rel], np.ndarray]


def _default_lift(D: Desc, R: Rel) -> np.ndarray:
    return rel_table(D, R)


def _carriers(n: int) -> tuple[Carrier, Carrier, Carrier]:
    return Carrier.range("X", n), Carrier.range("Y", n), Carrier.range("Z", n)


def _sized(sizes: Iterable[int], k: int) -> list[tuple[int, ...]]:
    return list(itertools.product(sizes, repeat=k))


def _random_rels(rng: random.Random, X: Carrier, Y: Carrier, count: int) -> list[Rel]:
    k = len(X) * len(Y)
    total = 2**k
    picks = rng.sample(range(total), min(count, total))
    out = []
    for bits in picks:
        flat = np.array([(bits >> i) & 1 for i in range(k)], dtype=bool)
        out.append(Rel(X, Y, flat.reshape(len(X), len(Y))))
    return out


def _fmt_rel(R: Rel) -> str:
    return "{" + ", ".join(f"{R.dom.label(x)}~{R.cod.label(y)}" for x, y in R.pairs()) + "}"


def _relation_jobs(cfg: SuiteConfig, arity: int, D: Desc) -> tuple[list[tuple[Rel, ...]], list[str]]:
    """Relation tuples for symmetry (arity 1) or transitivity (arity 2)."""
    jobs: list[tuple[Rel, ...]] = []
    notes: list[str] = []
    for dims in _sized(range(cfg.exhaustive_size + 1), arity + 1):
        cs = [Carrier.range(n, d) for n, d in zip("XYZ", dims)]
        if any(size(D, c) > cfg.table_cap for c in cs):
            notes.append(f"sizes {dims} skipped: interpretation above {cfg.table_cap}")
            continue
        if arity == 1:
            jobs.extend((R,) for R in relations(cs[0], cs[1]))
        else:
            rs = list(relations(cs[0], cs[1]))
            ss = list(relations(cs[1], cs[2]))
            jobs.extend(itertools.product(rs, ss))
    n = cfg.sample_size
    if n > cfg.exhaustive_size:
        c = Carrier.range("X", n)
        if size(D, c) > cfg.table_cap:
            notes.append(f"size {n} skipped: interpretation of {size(D, c)} above {cfg.table_cap}")
        else:
            rng = random.Random(cfg.seed)
            X, Y, Z = _carriers(n)
            if arity == 1:
                jobs.extend((R,) for R in _random_rels(rng, X, Y, cfg.samples))
            else:
                left = _random_rels(rng, X, Y, cfg.samples)
                right = _random_rels(rng, Y, Z, cfg.samples)
                jobs.extend(zip(left, right))
    return jobs, notes


def _bool_mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=bool)
    return (a.astype(np.float32) @ b.astype(np.float32)) > 0


def _symmetry(D: Desc, cfg: SuiteConfig, lift: Lift) -> ClauseResult:
    jobs, notes = _relation_jobs(cfg, 1, D)
    res = ClauseResult("symmetry", "pass", note="; ".join(notes) or None)
    for (R,) in jobs:
        T, Ti = lift(D, R), lift(D, inverse_rel(R))
        res.checked += 1
        if not np.array_equal(T, Ti.T):
            i, k = np.argwhere(T != Ti.T)[0]
            A, B = interpret(D, R.dom), interpret(D, R.cod)
            res.status = "fail"
            res.counterexample = (
                f"R={_fmt_rel(R)} at ({A.carrier.label(i)}, {B.carrier.label(k)}): "
                f"lift(R) says {bool(T[i, k])}, lift(R^-1) transposed says {bool(Ti[k, i])}"
            )
            return res
    return res


def _transitivity(D: Desc, cfg: SuiteConfig, lift: Lift) -> ClauseResult:
    jobs, notes = _relation_jobs(cfg, 2, D)
    res = ClauseResult("transitivity", "pass", note="; ".join(notes) or None)
    for R, S in jobs:
        through = _bool_mm(lift(D, R), lift(D, S))
        direct = lift(D, compose_rel(R, S))
        res.checked += 1
        bad = through & ~direct
        if bad.any():
            i, k = np.argwhere(bad)[0]
            A, C = interpret(D, R.dom), interpret(D, S.cod)
            res.status = "fail"
            res.counterexample = (
                f"R={_fmt_rel(R)}, R'={_fmt_rel(S)}: {A.carrier.label(i)} reaches "
                f"{C.carrier.label(k)} through a middle value but not under R.R'"
            )
            return res
    return res


def _descent_clause(D: Desc, cfg: SuiteConfig) -> ClauseResult:
    res = ClauseResult("descent", "pass")
    notes = []
    for n in range(cfg.sample_size + 1):
        X = Carrier.range("X", n)
        if size(D, X) > cfg.table_cap:
            notes.append(f"size {n} skipped: interpretation of {size(D, X)} above {cfg.table_cap}")
            continue
        space = interpret(D, X)
        for E in equivalences(X):
            q = quotient(X, E)
            self_rel = np.diagonal(rel_table(D, E))
            G = graph_rel(q.map)
            cand = rel_table(D, G)
            counts = cand.sum(axis=1)
            space_bar = interpret(D, q.carrier)
            for i in np.flatnonzero(self_rel):
                s = space.values[i]
                res.checked += 1
                try:
                    sbar = _descend(D, q, s, {})
                except DescentError as exc:
                    res.status, res.counterexample = "fail", f"E={_fmt_rel(E)}, s={space.carrier.label(i)}: {exc}"
                    return res
                j = space_bar.index[sbar]
                if counts[i] != 1 or not cand[i, j]:
                    res.status = "fail"
                    res.counterexample = (
                        f"E={_fmt_rel(E)}, s={space.carrier.label(i)}: {int(counts[i])} candidates, "
                        f"descended value {space_bar.carrier.label(j)}"
                    )
                    return res
    res.note = "; ".join(notes) or None
    return res


def suitability_suite(D: Desc, config: SuiteConfig | None = None, lift: Lift | None = None) -> SuiteReport:
    """Check symmetry, transitivity and descent for ``D`` on small carriers.

    ``lift`` replaces the relation lifting (used to inject faults in tests).
    """
    cfg = config or SuiteConfig()
    require_admissible(D)
    lift = lift or _default_lift
    report = SuiteReport("suitability", str(D))
    report.clauses.append(
        ClauseResult("set/prop preservation", "trivial", note="booleans are propositions; finite carriers are sets")
    )
    report.clauses.append(_symmetry(D, cfg, lift))
    report.clauses.append(_transitivity(D, cfg, lift))
    report.clauses.append(_descent_clause(D, cfg))
    return report


def positivity_suite(P: Desc, config: SuiteConfig | None = None, lift: Lift | None = None) -> SuiteReport:
    """Check reflexivity, reverse transitivity and the quotient condition."""
    cfg = config or SuiteConfig()
    if not is_positive(P):
        raise DescentError("precondition", f"{P} is not positive")
    lift = lift or _default_lift
    report = SuiteReport("positivity", str(P))

    refl = ClauseResult("reflexivity", "pass")
    for n in range(cfg.sample_size + 1):
        X = Carrier.range("X", n)
        if size(P, X) > cfg.table_cap:
            refl.note = f"sizes from {n} skipped"
            break
        diag = np.diagonal(lift(P, id_rel(X)))
        refl.checked += len(diag)
        if not diag.all():
            i = int(np.argmin(diag))
            refl.status = "fail"
            refl.counterexample = f"{interpret(P, X).carrier.label(i)} is not related to itself"
            break
    report.clauses.append(refl)

    jobs, notes = _relation_jobs(cfg, 2, P)
    rev = ClauseResult("reverse transitivity", "pass", note="; ".join(notes) or None)
    for R, S in jobs:
        through = _bool_mm(lift(P, R), lift(P, S))
        direct = lift(P, compose_rel(R, S))
        rev.checked += 1
        if not np.array_equal(through, direct):
            i, k = np.argwhere(through != direct)[0]
            A, C = interpret(P, R.dom), interpret(P, S.cod)
            rev.status = "fail"
            rev.counterexample = (
                f"R={_fmt_rel(R)}, R'={_fmt_rel(S)} at ({A.carrier.label(i)}, {C.carrier.label(k)}): "
                f"composite says {bool(direct[i, k])}, middle values say {bool(through[i, k])}"
            )
            break
    report.clauses.append(rev)

    quo = ClauseResult("quotients", "pass")
    for n in range(cfg.sample_size + 1):
        X = Carrier.range("X", n)
        if size(P, X) > cfg.table_cap:
            quo.note = f"sizes from {n} skipped"
            break
        for E in equivalences(X):
            quo.checked += 1
            try:
                qcm = quotient_condition_map(P, E)
            except NotAnEquivalence as exc:
                quo.status, quo.counterexample = "fail", f"E={_fmt_rel(E)}: lifted relation {exc}"
                break
            if not qcm.bijective:
                quo.status = "fail"
                quo.counterexample = f"E={_fmt_rel(E)}: factored map is not a bijection"
                break
        if quo.status == "fail":
            break
    report.clauses.append(quo)
    return report


# -- the pipeline ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransferResult:
    left_quotient: StructuredInstance
    right_quotient: StructuredInstance
    equiv: Bijection
    cross_witness_checked: bool
    qer: QerWitness
    left_descent: DescentResult
    right_descent: DescentResult
    relation_identity: bool


def structured_qer_pipeline(
    D: Desc,
    left: StructuredInstance,
    right: StructuredInstance,
    R: Rel,
    uniqueness: str = "auto",
) -> TransferResult:
    """Quotient both sides of a structured QER and relate the results.

    Raises :class:`NotStructured`, :class:`~repind.finrel.NotAQer` or
    :class:`DescentError` on bad input.
    """
    require_admissible(D)
    if left.desc != D or right.desc != D:
        raise CarrierMismatch("instances do not share the description")
    if R.dom != left.carrier or R.cod != right.carrier:
        raise CarrierMismatch("relation does not run between the instance carriers")
    bad = rel_check(D, R, left.value, right.value)
    if bad is not None:
        raise NotStructured(bad)
    w = check_qer(R)
    ld = descend(D, w.per_left, left.value, uniqueness, q=w.left_quotient)
    rd = descend(D, w.per_right, right.value, uniqueness, q=w.right_quotient)
    e = induced_equiv(w)
    qx, qy = w.left_quotient.map, w.right_quotient.map
    through = compose_rel(compose_rel(inverse_rel(graph_rel(qx)), R), graph_rel(qy))
    identity = through == graph_rel(e.forward)
    if not identity:
        raise SoundnessError("quotient maps do not carry R onto the graph of the induced bijection")
    sbar, tbar = ld.quotient_instance.value, rd.quotient_instance.value
    cross = rel_check(D, graph_rel(e.forward), sbar, tbar)
    if cross is not None:
        raise SoundnessError(f"quotient structures are not related by the induced bijection: {cross}")
    iota = equiv_check(D, e, sbar, tbar)
    if iota is not None:
        raise SoundnessError(f"quotient structures are not equivalent under the induced bijection: {iota}")
    return TransferResult(
        ld.quotient_instance, rd.quotient_instance, e, True, w, ld, rd, bool(identity)
    )
