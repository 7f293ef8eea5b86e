"""Run the relation checks and the quotient pipeline on a loaded spec."""

from __future__ import annotations

from .descent import DescentError, NotStructured, structured_qer_pipeline
from .finrel import NotAQer, SoundnessError, check_qer, zigzag_counterexample
from .report import Report
from .sip import TransferError, descend_observer, eval_axiom, transfer_axioms
from .specfile import Spec
from .structure import rel_check


def _relation_checks(spec: Spec, rep: Report) -> bool:
    R = spec.relation
    bad = rel_check(spec.desc, R, spec.left.value, spec.right.value)
    rep.check("structures are related", bad is None, None if bad is None else str(bad))
    cx = zigzag_counterexample(R)
    rep.check(
        "relation is zigzag-complete",
        cx is None,
        None if cx is None else [R.dom.label(cx[0]), R.cod.label(cx[1]), R.dom.label(cx[2]), R.cod.label(cx[3])],
    )
    left_free = [R.dom.label(i) for i in range(len(R.dom)) if not R.table[i].any()]
    right_free = [R.cod.label(j) for j in range(len(R.cod)) if not R.table[:, j].any()]
    rep.check("relation is total on the left", not left_free, left_free[:1] or None)
    rep.check("relation is total on the right", not right_free, right_free[:1] or None)
    return bad is None and cx is None and not left_free and not right_free


def qer_check(spec: Spec, source: str = "spec") -> Report:
    rep = Report("qer-check", source, {"left": spec.left.carrier.name, "right": spec.right.carrier.name})
    if _relation_checks(spec, rep):
        w = check_qer(spec.relation)
        rep.sections["classes"] = {
            "left": len(w.left_quotient.carrier),
            "right": len(w.right_quotient.carrier),
        }
    return rep


def run_pipeline(spec: Spec, source: str = "spec", uniqueness: str = "auto") -> Report:
    """Check the relation, quotient both sides and transfer the axioms left to right."""
    rep = Report("pipeline", source, {"left": spec.left.carrier.name, "right": spec.right.carrier.name})
    sig = spec.signature
    rep.sections["raw axioms"] = {
        side: [eval_axiom(F, sig, inst, obs).describe() for F in spec.axioms]
        for side, inst, obs in (
            ("left", spec.left, spec.left_observers),
            ("right", spec.right, spec.right_observers),
        )
    }
    if not _relation_checks(spec, rep):
        return rep
    try:
        res = structured_qer_pipeline(spec.desc, spec.left, spec.right, spec.relation, uniqueness)
    except (NotStructured, NotAQer, DescentError, SoundnessError) as exc:
        rep.check("pipeline", False, str(exc))
        return rep
    rep.check("left descent witness checked", res.left_descent.graph_witness_checked)
    rep.check("right descent witness checked", res.right_descent.graph_witness_checked)
    rep.check("descended structures are related by the induced bijection", res.cross_witness_checked)
    rep.check("quotient maps carry R to the graph of e", res.relation_identity)
    rep.sections["uniqueness"] = {"left": res.left_descent.uniqueness, "right": res.right_descent.uniqueness}
    rep.sections["quotient sizes"] = {
        "left": len(res.left_quotient.carrier),
        "right": len(res.right_quotient.carrier),
    }
    rep.sections["equivalence"] = {
        res.left_quotient.carrier.label(i): res.right_quotient.carrier.label(int(j))
        for i, j in enumerate(res.equiv.forward.table)
    }
    if not spec.axioms:
        return rep

    def quotient_observers(obs, q):
        return {k: o if k in spec.constant_observers else descend_observer(o, q) for k, o in obs.items()}

    try:
        qobs_l = quotient_observers(spec.left_observers, res.qer.left_quotient)
        qobs_r = quotient_observers(spec.right_observers, res.qer.right_quotient)
    except TransferError as exc:
        rep.check("observers descend to the quotients", False, str(exc))
        return rep
    quo = {
        "left": [eval_axiom(F, sig, res.left_quotient, qobs_l) for F in spec.axioms],
        "right": [eval_axiom(F, sig, res.right_quotient, qobs_r) for F in spec.axioms],
    }
    rep.sections["quotient axioms"] = {side: [r.describe() for r in rs] for side, rs in quo.items()}
    rep.check("left quotient satisfies the axioms", all(r.holds for r in quo["left"]))
    try:
        tr = transfer_axioms(spec.axioms, sig, res.equiv, res.left_quotient, res.right_quotient, qobs_l, qobs_r)
    except TransferError as exc:
        rep.check("axioms transfer to the right quotient", False, str(exc))
        return rep
    rep.check("axioms transfer to the right quotient", tr.ok)
    rep.check("transferred verdicts match direct verification", all(r.agree for r in tr.rows))
    return rep
