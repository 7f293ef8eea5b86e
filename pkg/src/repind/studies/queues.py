"""Lists versus batched (two-list) queues with a capacity bound.

Queues hold at most ``capacity`` elements; enqueueing onto a full queue
leaves it unchanged. Related states have the same length, so the capacity
guard fires identically on both sides.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..descent import TransferResult, structured_qer_pipeline
from ..finrel import Bijection, Carrier, FinMap, Rel, graph_rel
from ..report import Report
from ..sip import (
    AxiomResult,
    Formula,
    Observer,
    Signature,
    descend_observer,
    eval_axiom,
    parse_formula,
    transfer_axioms,
)
from ..structure import FunD, StructuredInstance, X, ConstD, MaybeD, ProdD, Just, FunTable, prod

DEFAULT_LETTERS = "bcdefghijk"


@dataclass(frozen=True)
class QueueStudyConfig:
    alphabet: int = 2
    capacity: int = 3
    letters: str | None = None

    def __post_init__(self):
        if self.alphabet < 1 or self.capacity < 1:
            raise ValueError("alphabet size and capacity must be positive")
        if self.letters is not None and len(self.letters) != self.alphabet:
            raise ValueError("letters must name exactly `alphabet` symbols")

    @property
    def symbols(self) -> str:
        return self.letters if self.letters is not None else DEFAULT_LETTERS[: self.alphabet]


def show_list(xs) -> str:
    return "[" + ", ".join(xs) + "]"


def show_pair(q) -> str:
    return f"({show_list(q[0])}, {show_list(q[1])})"


def append_reverse(q: tuple[tuple[str, ...], tuple[str, ...]]) -> tuple[str, ...]:
    xs, ys = q
    return xs + ys[::-1]


def fastcheck(xs: tuple, ys: tuple) -> tuple[tuple, tuple]:
    return ((), xs[::-1]) if not ys else (xs, ys)


def batched_enqueue(x: str, q, capacity: int):
    xs, ys = q
    if len(xs) + len(ys) >= capacity:
        return q
    return fastcheck((x,) + xs, ys)


def batched_dequeue(q):
    xs, ys = fastcheck(*q)
    if not ys:
        return None
    return fastcheck(xs, ys[1:]), ys[0]


def list_enqueue(x: str, xs: tuple, capacity: int):
    return xs if len(xs) >= capacity else (x,) + xs


def list_dequeue(xs: tuple):
    return None if not xs else (xs[:-1], xs[-1])


def list_states(letters: str, capacity: int) -> list[tuple[str, ...]]:
    out = []
    for n in range(capacity + 1):
        out.extend(itertools.product(letters, repeat=n))
    return out


def batched_states(letters: str, capacity: int) -> list[tuple[tuple, tuple]]:
    # by total length, then longer back list first, then lexicographically
    out = []
    for total in range(capacity + 1):
        for k in range(total, -1, -1):
            for xs in itertools.product(letters, repeat=k):
                for ys in itertools.product(letters, repeat=total - k):
                    out.append((xs, ys))
    return out


QUEUE_OPS = (("empty", "l"), ("enqueue", "rl"), ("dequeue", "rr"))


def queue_desc(A: Carrier):
    return prod(X, FunD(ConstD(A), FunD(X, X)), FunD(X, MaybeD(ProdD(X, ConstD(A)))))


def queue_axioms(capacity: int) -> list[Formula]:
    return [
        parse_formula("(forall () (= (dequeue empty) (nothing)))", "dequeue-empty"),
        parse_formula(
            f"""(forall ((a A) (q X))
                  (implies ((!= (obs size q) (const Size "{capacity}")))
                    (= (dequeue (enqueue a q))
                       (just (case (dequeue q)
                                   (pair empty a)
                                   (r) (pair (enqueue a (fst r)) (snd r)))))))""",
            "dequeue-enqueue",
        ),
    ]


def _instance(C: Carrier, A: Carrier, D, states, empty, enq, deq) -> StructuredInstance:
    index = {s: i for i, s in enumerate(states)}
    n, a = len(states), len(A)
    enq_t = np.array([[index[enq(A.value(x), s)] for s in states] for x in range(a)], dtype=np.int64)
    deq_t = np.zeros(n, dtype=np.int64)
    for i, s in enumerate(states):
        r = deq(s)
        deq_t[i] = 0 if r is None else 1 + index[r[0]] * a + A.index(r[1])
    return StructuredInstance(C, D, (index[empty], (FunTable(enq_t), FunTable(deq_t))))


@dataclass(frozen=True, eq=False)
class QueueStudy:
    config: QueueStudyConfig
    A: Carrier
    size_carrier: Carrier
    desc: object
    signature: Signature
    lists: StructuredInstance
    batched: StructuredInstance
    relation: Rel  # batched -> list, the graph of appendReverse
    axioms: list[Formula]
    list_size: Observer
    batched_size: Observer


def build_queue_study(cfg: QueueStudyConfig | None = None) -> QueueStudy:
    cfg = cfg or QueueStudyConfig()
    letters, N = cfg.symbols, cfg.capacity
    A = Carrier("A", tuple(letters), tuple(letters))
    Size = Carrier("Size", tuple(str(i) for i in range(N + 1)), tuple(range(N + 1)))
    D = queue_desc(A)
    lst = list_states(letters, N)
    bat = batched_states(letters, N)
    L = Carrier("List", tuple(show_list(s) for s in lst), tuple(lst))
    B = Carrier("Batched", tuple(show_pair(q) for q in bat), tuple(bat))
    lists = _instance(L, A, D, lst, (), lambda x, s: list_enqueue(x, s, N), list_dequeue)
    batched = _instance(B, A, D, bat, ((), ()), lambda x, q: batched_enqueue(x, q, N), batched_dequeue)
    ar = FinMap.from_function(B, L, lambda i: L.index_of_value(append_reverse(B.value(i))))
    sig = Signature(D, QUEUE_OPS, (A, Size))
    list_size = Observer("size", FinMap.from_function(L, Size, lambda i: len(L.value(i))))
    bat_size = Observer("size", FinMap.from_function(B, Size, lambda i: len(append_reverse(B.value(i)))))
    return QueueStudy(cfg, A, Size, D, sig, lists, batched, graph_rel(ar), queue_axioms(N), list_size, bat_size)


def enqueue_c_witness(letters: str) -> dict[str, str] | None:
    """Enqueue ``c`` onto the two-element queue whose back is ``b``."""
    if "c" not in letters or "b" not in letters:
        return None
    other = "a" if "a" in letters else "c"
    return {"a": "c", "q": show_pair((("b", other), ()))}


def tilt_classes_match(study: QueueStudy) -> bool:
    """Do tilt moves generate exactly the kernel of appendReverse?"""
    B = study.batched.carrier
    parent = list(range(len(B)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(B)):
        xs, ys = B.value(i)
        if xs:
            j = B.index_of_value((xs[:-1], ys + (xs[-1],)))
            parent[find(i)] = find(j)
    roots = np.array([find(i) for i in range(len(B))])
    tilt = roots[:, None] == roots[None, :]
    kernel = study.relation.table @ study.relation.table.T
    return bool(np.array_equal(tilt, kernel))


def run(alphabet: int = 2, capacity: int = 3, letters: str | None = None) -> Report:
    cfg = QueueStudyConfig(int(alphabet), int(capacity), letters)
    st = build_queue_study(cfg)
    rep = Report("case-study", "queues", {"alphabet": cfg.alphabet, "capacity": cfg.capacity, "letters": cfg.symbols})
    sig, obs_l, obs_b = st.signature, {"size": st.list_size}, {"size": st.batched_size}

    raw = {}
    for side, inst, obs in (("list", st.lists, obs_l), ("batched", st.batched, obs_b)):
        raw[side] = [eval_axiom(F, sig, inst, obs) for F in st.axioms]
    rep.sections["raw axioms"] = {side: [r.describe() for r in rs] for side, rs in raw.items()}
    rep.check("raw list queue satisfies the axioms", all(r.holds for r in raw["list"]))
    de_raw = raw["batched"][1]
    rep.check(
        "raw batched queue breaks dequeue-enqueue",
        not de_raw.holds,
        None if de_raw.holds else dict(de_raw.counterexample) | {"lhs": de_raw.lhs, "rhs": de_raw.rhs},
    )
    witness = enqueue_c_witness(cfg.symbols)
    if witness is not None and cfg.capacity >= 3:
        at = eval_axiom(st.axioms[1], sig, st.batched, obs_b, at=witness)
        rep.sections["witness"] = {"assignment": witness, "lhs": at.lhs, "rhs": at.rhs}
        rep.check("raw batched queue fails at the enqueue-c witness", not at.holds, {"lhs": at.lhs, "rhs": at.rhs})

    res: TransferResult = structured_qer_pipeline(st.desc, st.batched, st.lists, st.relation)
    rep.check("appendReverse graph is a QER", True)
    rep.check(
        "pipeline witnesses checked",
        res.left_descent.graph_witness_checked and res.right_descent.graph_witness_checked and res.cross_witness_checked,
    )
    rep.check("quotient maps carry R to the graph of e", res.relation_identity)
    right_part = res.qer.right_quotient.partition
    rep.check("list-side classes are singletons", len(right_part) == len(st.lists.carrier))
    rep.check("tilt moves generate the batched classes", tilt_classes_match(st))
    rep.sections["quotient sizes"] = {
        "batched": len(res.left_quotient.carrier),
        "list": len(res.right_quotient.carrier),
    }

    qobs_b = {"size": descend_observer(st.batched_size, res.qer.left_quotient)}
    qobs_l = {"size": descend_observer(st.list_size, res.qer.right_quotient)}
    quo = {
        "batched": [eval_axiom(F, sig, res.left_quotient, qobs_b) for F in st.axioms],
        "list": [eval_axiom(F, sig, res.right_quotient, qobs_l) for F in st.axioms],
    }
    rep.sections["quotient axioms"] = {side: [r.describe() for r in rs] for side, rs in quo.items()}
    rep.check("quotient instances satisfy the axioms", all(r.holds for rs in quo.values() for r in rs))

    tr = transfer_axioms(st.axioms, sig, res.equiv.inverse(), res.right_quotient, res.left_quotient, qobs_l, qobs_b)
    rep.check("axioms transfer from list quotient to batched quotient", tr.ok)
    rep.check("transferred verdicts match direct verification", all(
        r.right.holds == d.holds for r, d in zip(tr.rows, quo["batched"])
    ))
    rep.sections["equivalence"] = {
        res.left_quotient.carrier.label(i): res.right_quotient.carrier.label(int(j))
        for i, j in enumerate(res.equiv.forward.table)
    }
    return rep


def build_spec(cfg: QueueStudyConfig | None = None):
    """The study as a spec file: batched on the left, lists on the right."""
    from ..specfile import spec_from_instances

    st = build_queue_study(cfg)
    return spec_from_instances(
        st.batched, st.lists, st.relation, tuple(op for op, _ in QUEUE_OPS), (st.A, st.size_carrier),
        st.axioms, {"size": st.batched_size}, {"size": st.list_size}, graph=True,
    )
