"""Addition modulo ``2**w`` on residues versus fixed-width binary words.

Bits are stored least significant first, so ``1`` is ``[1, 0]`` at width 2.
Words are enumerated lexicographically, which makes the encoding a
nontrivial permutation of indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..finrel import Bijection, Carrier, FinMap, graph_rel
from ..report import Report
from ..sip import Signature, check_structured_equiv, parse_formula, transfer_axioms
from ..structure import FunD, FunTable, StructuredInstance, X, prod

MONOID_OPS = (("unit", "l"), ("op", "r"))


def monoid_desc():
    return prod(X, FunD(X, FunD(X, X)))


def monoid_axioms():
    return [
        parse_formula("(forall ((x X) (y X) (z X)) (= (op (op x y) z) (op x (op y z))))", "assoc"),
        parse_formula("(forall ((x X)) (= (op unit x) x))", "left-unit"),
        parse_formula("(forall ((x X)) (= (op x unit) x))", "right-unit"),
    ]


def encode(n: int, w: int) -> tuple[int, ...]:
    return tuple((n >> i) & 1 for i in range(w))


def ripple_add(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    out, carry = [], 0
    for x, y in zip(a, b):
        s = x + y + carry
        out.append(s & 1)
        carry = s >> 1
    return tuple(out)


def show_bits(b) -> str:
    return "[" + ", ".join(str(x) for x in b) + "]"


@dataclass(frozen=True, eq=False)
class MonoidStudy:
    width: int
    signature: Signature
    residue: StructuredInstance
    binary: StructuredInstance
    equiv: Bijection


def build_monoid_study(width: int = 2) -> MonoidStudy:
    if not 1 <= width <= 4:
        raise ValueError("width must be between 1 and 4")
    n = 2**width
    Z = Carrier("Residue", tuple(str(i) for i in range(n)), tuple(range(n)))
    words = list(itertools.product((0, 1), repeat=width))
    B = Carrier("Binary", tuple(show_bits(b) for b in words), tuple(words))
    add = np.array([[(i + j) % n for j in range(n)] for i in range(n)], dtype=np.int64)
    badd = np.array(
        [[B.index_of_value(ripple_add(a, b)) for b in words] for a in words], dtype=np.int64
    ).reshape(n, n)
    D = monoid_desc()
    residue = StructuredInstance(Z, D, (0, FunTable(add)))
    binary = StructuredInstance(B, D, (B.index_of_value(encode(0, width)), FunTable(badd)))
    e = Bijection.from_map(FinMap.from_function(Z, B, lambda i: B.index_of_value(encode(i, width))))
    return MonoidStudy(width, Signature(D, MONOID_OPS), residue, binary, e)


def brute_force_monoid(words, add) -> bool:
    """Plain-loop check of associativity and both unit laws."""
    zero = words[0] if all(x == 0 for x in words[0]) else next(w for w in words if not any(w))
    for a in words:
        if add(zero, a) != a or add(a, zero) != a:
            return False
        for b in words:
            for c in words:
                if add(add(a, b), c) != add(a, add(b, c)):
                    return False
    return True


def run(width: int = 2) -> Report:
    st = build_monoid_study(int(width))
    rep = Report("case-study", "monoids", {"width": st.width})
    D, sig, axioms = monoid_desc(), st.signature, monoid_axioms()
    bad = check_structured_equiv(D, st.equiv, st.residue.value, st.binary.value)
    rep.check("binary encoding is a monoid homomorphism", bad is None, None if bad is None else str(bad))
    tr = transfer_axioms(axioms, sig, st.equiv, st.residue, st.binary)
    rep.check("axioms transfer from residues to binary words", tr.ok)
    rep.check("transferred verdicts match direct verification", all(r.agree for r in tr.rows))
    words = list(st.binary.carrier.values)
    rep.check("independent loop check on binary words agrees", brute_force_monoid(words, ripple_add) == tr.ok)
    rep.sections["encoding"] = {
        st.residue.carrier.label(i): st.binary.carrier.label(int(j)) for i, j in enumerate(st.equiv.forward.table)
    }
    return rep


def build_spec(width: int = 2):
    """The study as a spec file: residues on the left, binary words on the right."""
    from ..specfile import spec_from_instances

    st = build_monoid_study(width)
    return spec_from_instances(
        st.residue, st.binary, graph_rel(st.equiv.forward), tuple(op for op, _ in MONOID_OPS),
        axioms=monoid_axioms(), graph=True,
    )
