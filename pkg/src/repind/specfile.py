"""JSON spec files describing two implementations of one interface.

Schema (all keys required unless marked optional)::

    {
      "carriers":   {"<name>": ["<label>", ...], ...},
      "constants":  ["<carrier name>", ...],          # usable as const(K)
      "desc":       "<description, e.g. prod(X, fun(X, X))>",
      "operations": ["<op name>", ...],               # right-nested components of desc
      "instances":  {"left":  {"carrier": "<name>", "value": <literal>},
                     "right": {"carrier": "<name>", "value": <literal>}},
      "relation":   {"pairs": [["<left label>", "<right label>"], ...]}
                  | {"graphOf": ["<right label>", ...]},   # image of each left element
      "axioms":     [{"name": "<name>", "formula": "<s-expression>"}, ...],   # optional
      "observers":  {"<name>": {"codomain": "<carrier>", "left": [...], "right": [...]}
                   | {"<name>": {"domain": "<carrier>", "codomain": "<carrier>", "table": [...]}}
                                                                              # optional
    }

Literals follow the description: an element label for ``X`` and ``const``,
a two-element array for ``prod``, ``null`` or the inner literal for
``maybe`` (``{"just": v}`` is always accepted and required when the inner
description is itself a ``maybe``), and an array for ``fun`` listing the
image of every domain value in canonical enumeration order. Canonical
order is the index order of the domain's interpretation: carrier order for
``X`` and constants, lexicographic for pairs, ``nothing`` first for
``maybe``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .finrel import Carrier, FinMap, FinRelError, Rel, graph_rel
from .sip import Formula, FormulaError, Observer, Signature, check_formula, parse_formula
from .structure import (
    ConstD,
    Desc,
    FunD,
    FunTable,
    Just,
    MaybeD,
    ProdD,
    StructuredInstance,
    StructureError,
    VarD,
    decode,
    interpret,
    parse_desc,
    value_code,
)


class SpecError(FinRelError):
    """Invalid spec file; ``where`` is a JSON path such as ``instances.left.value[1]``."""

    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(eq=False)
class Spec:
    carriers: dict[str, Carrier]
    constants: tuple[str, ...]
    desc: Desc
    operations: tuple[str, ...]
    left: StructuredInstance
    right: StructuredInstance
    relation: Rel
    relation_form: str  # "pairs" or "graphOf"
    axioms: list[Formula] = field(default_factory=list)
    left_observers: dict[str, Observer] = field(default_factory=dict)
    right_observers: dict[str, Observer] = field(default_factory=dict)
    constant_observers: tuple[str, ...] = ()

    @property
    def signature(self) -> Signature:
        return Signature(self.desc, op_paths(self.operations), tuple(self.carriers[k] for k in self.constants))

    def __eq__(self, other):
        if not isinstance(other, Spec):
            return NotImplemented
        return serialize(self) == serialize(other)


def op_paths(ops: tuple[str, ...] | list[str]) -> tuple[tuple[str, str], ...]:
    """Paths of the components of a right-nested product, one per operation."""
    n = len(ops)
    return tuple((op, "r" * i + ("l" if i < n - 1 else "")) for i, op in enumerate(ops))


# -- literals --------------------------------------------------------------


def _at(where: str, key: Any) -> str:
    return f"{where}[{key}]" if isinstance(key, int) else (f"{where}.{key}" if where else key)


def value_from_literal(D: Desc, X: Carrier, lit: Any, where: str = "value") -> Any:
    if isinstance(D, (VarD, ConstD)):
        C = X if isinstance(D, VarD) else D.carrier
        if not isinstance(lit, str):
            raise SpecError(where, f"expected an element of {C.name}, got {json.dumps(lit)}")
        if lit not in C.labels:
            raise SpecError(where, f"{lit!r} is not an element of {C.name}")
        return C.index(lit)
    if isinstance(D, ProdD):
        if not isinstance(lit, list) or len(lit) != 2:
            raise SpecError(where, f"expected a two-element array for {D}")
        return (value_from_literal(D.left, X, lit[0], _at(where, 0)), value_from_literal(D.right, X, lit[1], _at(where, 1)))
    if isinstance(D, MaybeD):
        if lit is None:
            return None
        if isinstance(lit, dict):
            if set(lit) != {"just"}:
                raise SpecError(where, "a maybe object must have the single key 'just'")
            return Just(value_from_literal(D.inner, X, lit["just"], _at(where, "just")))
        if isinstance(D.inner, MaybeD):
            raise SpecError(where, f"nested maybe needs an explicit {{\"just\": ...}} for {D}")
        return Just(value_from_literal(D.inner, X, lit, where))
    dom = interpret(D.domain, X)
    if not isinstance(lit, list):
        raise SpecError(where, f"expected an array of {len(dom)} images for {D}")
    if len(lit) < len(dom):
        missing = dom.carrier.label(len(lit))
        raise SpecError(where, f"function table is not total: no image for domain value {missing}")
    if len(lit) > len(dom):
        raise SpecError(where, f"function table has {len(lit)} entries, the domain has {len(dom)}")
    parts = [value_from_literal(D.codomain, X, x, _at(where, i)) for i, x in enumerate(lit)]
    if isinstance(D.codomain, FunD):
        return FunTable(np.stack([p.data for p in parts]))
    return FunTable(np.array([value_code(D.codomain, X, p) for p in parts], dtype=np.int64))


def value_to_literal(D: Desc, X: Carrier, v: Any) -> Any:
    if isinstance(D, VarD):
        return X.label(v)
    if isinstance(D, ConstD):
        return D.carrier.label(v)
    if isinstance(D, ProdD):
        return [value_to_literal(D.left, X, v[0]), value_to_literal(D.right, X, v[1])]
    if isinstance(D, MaybeD):
        if v is None:
            return None
        inner = value_to_literal(D.inner, X, v.value)
        return {"just": inner} if isinstance(D.inner, MaybeD) else inner
    return [value_to_literal(D.codomain, X, decode(D.codomain, X, row)) for row in v.data]


# -- loading ---------------------------------------------------------------


def _require(obj: dict, key: str, kind: type, where: str = "") -> Any:
    if key not in obj:
        raise SpecError(_at(where, key), "missing field")
    val = obj[key]
    if not isinstance(val, kind):
        raise SpecError(_at(where, key), f"expected {kind.__name__}")
    return val


def _label_table(C: Carrier, D: Carrier, table: Any, where: str) -> FinMap:
    if not isinstance(table, list):
        raise SpecError(where, "expected an array")
    if len(table) < len(C):
        raise SpecError(where, f"table is not total: no image for {C.label(len(table))}")
    if len(table) > len(C):
        raise SpecError(where, f"table has {len(table)} entries for {len(C)} elements of {C.name}")
    out = []
    for i, lab in enumerate(table):
        if not isinstance(lab, str) or lab not in D.labels:
            raise SpecError(_at(where, i), f"{json.dumps(lab)} is not an element of {D.name}")
        out.append(D.index(lab))
    return FinMap(C, D, np.array(out, dtype=np.int64))


def parse_spec(data: Any) -> Spec:
    if not isinstance(data, dict):
        raise SpecError("", "a spec must be a JSON object")
    known = {"carriers", "constants", "desc", "operations", "instances", "relation", "axioms", "observers"}
    for k in data:
        if k not in known:
            raise SpecError(k, "unknown field")

    raw_carriers = _require(data, "carriers", dict)
    carriers: dict[str, Carrier] = {}
    for name, labels in raw_carriers.items():
        where = _at("carriers", name)
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise SpecError(where, "expected an array of string labels")
        try:
            carriers[name] = Carrier(name, tuple(labels))
        except FinRelError as exc:
            raise SpecError(where, str(exc)) from None

    def carrier(name: Any, where: str) -> Carrier:
        if not isinstance(name, str) or name not in carriers:
            raise SpecError(where, f"unknown carrier {json.dumps(name)}")
        return carriers[name]

    constants = tuple(_require(data, "constants", list))
    for i, name in enumerate(constants):
        carrier(name, _at("constants", i))
    try:
        desc = parse_desc(_require(data, "desc", str), {k: carriers[k] for k in constants})
    except StructureError as exc:
        raise SpecError("desc", str(exc)) from None

    ops = _require(data, "operations", list)
    if not ops or not all(isinstance(o, str) for o in ops) or len(set(ops)) != len(ops):
        raise SpecError("operations", "expected a non-empty array of distinct names")
    node = desc
    for i in range(len(ops) - 1):
        if not isinstance(node, ProdD):
            raise SpecError(_at("operations", i + 1), f"{desc} has fewer than {len(ops)} components")
        node = node.right

    insts = _require(data, "instances", dict)
    sides = {}
    for side in ("left", "right"):
        where = _at("instances", side)
        obj = _require(insts, side, dict, "instances")
        C = carrier(_require(obj, "carrier", str, where), _at(where, "carrier"))
        if C.name in constants:
            raise SpecError(_at(where, "carrier"), "instance carriers cannot also be constants")
        if "value" not in obj:
            raise SpecError(_at(where, "value"), "missing field")
        try:
            value = value_from_literal(desc, C, obj["value"], _at(where, "value"))
        except StructureError as exc:
            raise SpecError(_at(where, "value"), str(exc)) from None
        sides[side] = StructuredInstance(C, desc, value)
    L, Rc = sides["left"].carrier, sides["right"].carrier

    rel = _require(data, "relation", dict)
    if set(rel) == {"pairs"}:
        pairs = rel["pairs"]
        if not isinstance(pairs, list):
            raise SpecError("relation.pairs", "expected an array")
        idx = []
        for i, p in enumerate(pairs):
            w = _at("relation.pairs", i)
            if not (isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p)):
                raise SpecError(w, "expected [left label, right label]")
            if p[0] not in L.labels:
                raise SpecError(_at(w, 0), f"{p[0]!r} is not an element of {L.name}")
            if p[1] not in Rc.labels:
                raise SpecError(_at(w, 1), f"{p[1]!r} is not an element of {Rc.name}")
            idx.append((L.index(p[0]), Rc.index(p[1])))
        relation, form = Rel.from_pairs(L, Rc, idx), "pairs"
    elif set(rel) == {"graphOf"}:
        relation, form = graph_rel(_label_table(L, Rc, rel["graphOf"], "relation.graphOf")), "graphOf"
    else:
        raise SpecError("relation", "expected exactly one of 'pairs' or 'graphOf'")

    observers_l: dict[str, Observer] = {}
    observers_r: dict[str, Observer] = {}
    const_obs = []
    for name, obj in data.get("observers", {}).items():
        where = _at("observers", name)
        if not isinstance(obj, dict):
            raise SpecError(where, "expected an object")
        cod = carrier(_require(obj, "codomain", str, where), _at(where, "codomain"))
        if "domain" in obj:
            dom = carrier(obj["domain"], _at(where, "domain"))
            if dom.name not in constants:
                raise SpecError(_at(where, "domain"), "observer domains must be constants or the instance carriers")
            o = Observer(name, _label_table(dom, cod, _require(obj, "table", list, where), _at(where, "table")))
            observers_l[name] = observers_r[name] = o
            const_obs.append(name)
        else:
            observers_l[name] = Observer(name, _label_table(L, cod, _require(obj, "left", list, where), _at(where, "left")))
            observers_r[name] = Observer(name, _label_table(Rc, cod, _require(obj, "right", list, where), _at(where, "right")))
        if cod.name not in constants:
            raise SpecError(_at(where, "codomain"), "observer codomains must be listed in constants")

    spec = Spec(carriers, constants, desc, tuple(ops), sides["left"], sides["right"], relation, form,
                [], observers_l, observers_r, tuple(const_obs))
    sig = spec.signature
    for i, ax in enumerate(data.get("axioms", [])):
        where = _at("axioms", i)
        if not isinstance(ax, dict):
            raise SpecError(where, "expected an object with 'name' and 'formula'")
        name = _require(ax, "name", str, where)
        try:
            F = parse_formula(_require(ax, "formula", str, where), name)
            for inst, obs in ((spec.left, observers_l), (spec.right, observers_r)):
                check_formula(F, sig, inst, obs)
        except (FormulaError, StructureError) as exc:
            raise SpecError(_at(where, "formula"), str(exc)) from None
        spec.axioms.append(F)
    return spec


def loads_spec(text: str) -> Spec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return parse_spec(data)


def load_spec(path: str | Path) -> Spec:
    return loads_spec(Path(path).read_text())


# -- serialization ---------------------------------------------------------


def serialize(spec: Spec) -> dict:
    out: dict[str, Any] = {
        "carriers": {name: list(C.labels) for name, C in spec.carriers.items()},
        "constants": list(spec.constants),
        "desc": str(spec.desc),
        "operations": list(spec.operations),
        "instances": {
            side: {"carrier": inst.carrier.name, "value": value_to_literal(spec.desc, inst.carrier, inst.value)}
            for side, inst in (("left", spec.left), ("right", spec.right))
        },
    }
    R = spec.relation
    if spec.relation_form == "graphOf":
        out["relation"] = {"graphOf": [R.cod.label(int(j)) for j in (np.argmax(R.table, axis=1) if R.table.size else [])]}
    else:
        out["relation"] = {"pairs": [[R.dom.label(x), R.cod.label(y)] for x, y in R.pairs()]}
    if spec.axioms:
        out["axioms"] = [{"name": F.name, "formula": F.text} for F in spec.axioms]
    if spec.left_observers:
        obs = {}
        for name, o in spec.left_observers.items():
            cod = o.map.cod
            if name in spec.constant_observers:
                obs[name] = {"domain": o.map.dom.name, "codomain": cod.name,
                             "table": [cod.label(int(j)) for j in o.map.table]}
            else:
                r = spec.right_observers[name]
                obs[name] = {"codomain": cod.name,
                             "left": [cod.label(int(j)) for j in o.map.table],
                             "right": [cod.label(int(j)) for j in r.map.table]}
        out["observers"] = obs
    return out


def dumps_spec(spec: Spec) -> str:
    return json.dumps(serialize(spec), indent=1) + "\n"


def spec_from_instances(
    left: StructuredInstance,
    right: StructuredInstance,
    relation: Rel,
    operations: tuple[str, ...],
    constants: tuple[Carrier, ...] = (),
    axioms: list[Formula] | None = None,
    left_observers: dict[str, Observer] | None = None,
    right_observers: dict[str, Observer] | None = None,
    graph: bool = False,
) -> Spec:
    """Package in-memory instances as a spec, relabelling carriers by label only."""
    def plain(C: Carrier) -> Carrier:
        return Carrier(C.name, C.labels)

    carriers = {C.name: plain(C) for C in constants}
    L, R = plain(left.carrier), plain(right.carrier)
    carriers[L.name], carriers[R.name] = L, R
    consts = {C.name: carriers[C.name] for C in constants}
    desc = parse_desc(str(left.desc), consts)
    left_observers = left_observers or {}
    right_observers = right_observers or {}
    const_obs = tuple(k for k, o in left_observers.items() if o.map.dom != left.carrier)

    def remap(o: Observer, C: Carrier) -> Observer:
        dom = C if o.map.dom == left.carrier or o.map.dom == right.carrier else carriers[o.map.dom.name]
        return Observer(o.name, FinMap(dom, carriers[o.map.cod.name], np.asarray(o.map.table)))

    spec = Spec(
        carriers,
        tuple(C.name for C in constants),
        desc,
        tuple(operations),
        StructuredInstance(L, desc, left.value),
        StructuredInstance(R, desc, right.value),
        Rel(L, R, relation.table),
        "graphOf" if graph else "pairs",
        list(axioms or []),
        {k: remap(o, L) for k, o in left_observers.items()},
        {k: remap(right_observers.get(k, o), R) for k, o in left_observers.items()},
        const_obs,
    )
    return loads_spec(dumps_spec(spec))
