"""Guarded equational axioms, exhaustive evaluation, and transfer along equivalences.

Formulas are written as S-expressions::

    (forall ((a A) (q X))
      (implies ((!= (obs size q) (const Size 3)))
        (= (dequeue (enqueue a q))
           (just (case (dequeue q) (pair empty a) (r) (pair (enqueue a (fst r)) (snd r)))))))

Variable sorts are ``X``, the name of a constant carrier, or a quoted
description string. Every term of a non-function sort is evaluated as its
index in the canonical enumeration, so a whole block of assignments is
evaluated at once with numpy.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .finrel import Bijection, Carrier, CarrierMismatch, FinMap, FinRelError, Quotient
from .structure import (
    ConstD,
    Desc,
    FunD,
    MaybeD,
    Mismatch,
    ProdD,
    StructuredInstance,
    VarD,
    X as XD,
    code_value,
    interpret,
    value_code,
    component,
    equiv_check,
    parse_desc,
    project,
    render,
    size,
)

_CHUNK = 1 << 21


class FormulaError(FinRelError):
    """Syntax or sort error in a formula."""


class TransferError(FinRelError):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


# -- terms -----------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    carrier: str
    label: str


@dataclass(frozen=True)
class Op:
    name: str
    args: tuple


@dataclass(frozen=True)
class Obs:
    name: str
    arg: Any


@dataclass(frozen=True)
class Ctor:
    """``just``, ``nothing``, ``pair``, ``fst`` or ``snd``."""

    kind: str
    args: tuple


@dataclass(frozen=True)
class Case:
    scrutinee: Any
    none: Any
    var: str
    some: Any


@dataclass(frozen=True)
class Guard:
    lhs: Any
    rhs: Any
    negated: bool = False


@dataclass(frozen=True)
class Formula:
    name: str
    variables: tuple[tuple[str, str], ...]  # (name, sort text)
    guards: tuple[Guard, ...]
    lhs: Any
    rhs: Any
    text: str

    @property
    def observers(self) -> frozenset[str]:
        found: set[str] = set()
        for t in (self.lhs, self.rhs, *[g.lhs for g in self.guards], *[g.rhs for g in self.guards]):
            _collect_obs(t, found)
        return frozenset(found)


def _collect_obs(t, out: set[str]) -> None:
    if isinstance(t, Obs):
        out.add(t.name)
        _collect_obs(t.arg, out)
    elif isinstance(t, (Op, Ctor)):
        for a in t.args:
            _collect_obs(a, out)
    elif isinstance(t, Case):
        for a in (t.scrutinee, t.none, t.some):
            _collect_obs(a, out)


# -- S-expression reader ---------------------------------------------------

_SX_TOKEN = re.compile(r'\s*(?:(?P<open>\()|(?P<close>\))|"(?P<str>[^"]*)"|(?P<sym>[^\s()"]+))')


def read_sexpr(text: str):
    """Parse one S-expression into nested lists of strings.

    Quoted strings are returned wrapped in a 1-tuple to tell them apart.
    """
    pos, stack, out = 0, [[]], None
    text = text.strip()
    while pos < len(text):
        m = _SX_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaError(f"cannot read character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.group("open"):
            stack.append([])
        elif m.group("close"):
            if len(stack) == 1:
                raise FormulaError(f"unbalanced ')' at offset {m.start()}")
            done = stack.pop()
            stack[-1].append(done)
        elif m.group("str") is not None:
            stack[-1].append((m.group("str"),))
        else:
            stack[-1].append(m.group("sym"))
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if len(stack) != 1:
        raise FormulaError("unbalanced '(' at end of input")
    if len(stack[0]) != 1:
        raise FormulaError(f"expected one expression, found {len(stack[0])}")
    out = stack[0][0]
    return out


def parse_formula(text: str, name: str = "axiom") -> Formula:
    sx = read_sexpr(text)
    if not (isinstance(sx, list) and sx and sx[0] == "forall" and len(sx) == 3):
        raise FormulaError(f"{name}: expected (forall (bindings) body)")
    binds = []
    for b in sx[1]:
        if not (isinstance(b, list) and len(b) == 2 and isinstance(b[0], str)):
            raise FormulaError(f"{name}: malformed binding {b!r}")
        sort = b[1][0] if isinstance(b[1], tuple) else b[1]
        if not isinstance(sort, str):
            raise FormulaError(f"{name}: malformed sort in binding {b[0]}")
        binds.append((b[0], sort))
    names = [n for n, _ in binds]
    if len(set(names)) != len(names):
        raise FormulaError(f"{name}: duplicate variable")
    body = sx[2]
    guards: list[Guard] = []
    if isinstance(body, list) and body and body[0] == "implies":
        if len(body) != 3 or not isinstance(body[1], list):
            raise FormulaError(f"{name}: expected (implies (guards) conclusion)")
        for g in body[1]:
            guards.append(_parse_eq(g, set(names), name, allow_neg=True))
        body = body[2]
    concl = _parse_eq(body, set(names), name, allow_neg=False)
    return Formula(name, tuple(binds), tuple(guards), concl.lhs, concl.rhs, " ".join(text.split()))


def _parse_eq(sx, bound: set[str], name: str, allow_neg: bool) -> Guard:
    ops = ("=", "!=") if allow_neg else ("=",)
    if not (isinstance(sx, list) and len(sx) == 3 and sx[0] in ops):
        raise FormulaError(f"{name}: expected ({' or '.join(ops)} term term), got {_show(sx)}")
    return Guard(_parse_term(sx[1], bound, name), _parse_term(sx[2], bound, name), sx[0] == "!=")


def _show(sx) -> str:
    if isinstance(sx, list):
        return "(" + " ".join(_show(x) for x in sx) + ")"
    if isinstance(sx, tuple):
        return f'"{sx[0]}"'
    return str(sx)


def _parse_term(sx, bound: set[str], name: str):
    if isinstance(sx, str):
        if sx in bound:
            return Var(sx)
        return Ctor("nothing", ()) if sx == "nothing" else Op(sx, ())
    if isinstance(sx, tuple) or not sx:
        raise FormulaError(f"{name}: unexpected {_show(sx)}")
    head, rest = sx[0], sx[1:]
    if not isinstance(head, str):
        raise FormulaError(f"{name}: operator position holds {_show(head)}")
    if head == "const":
        if len(rest) != 2 or not isinstance(rest[0], str) or isinstance(rest[1], list):
            raise FormulaError(f"{name}: expected (const CARRIER LABEL)")
        label = rest[1][0] if isinstance(rest[1], tuple) else rest[1]
        return Const(rest[0], label)
    if head == "obs":
        if len(rest) != 2 or not isinstance(rest[0], str):
            raise FormulaError(f"{name}: expected (obs NAME term)")
        return Obs(rest[0], _parse_term(rest[1], bound, name))
    if head in ("just", "fst", "snd", "nothing", "pair"):
        arity = {"just": 1, "fst": 1, "snd": 1, "nothing": 0, "pair": 2}[head]
        if len(rest) != arity:
            raise FormulaError(f"{name}: {head} takes {arity} argument(s)")
        return Ctor(head, tuple(_parse_term(r, bound, name) for r in rest))
    if head == "case":
        if len(rest) != 4 or not (isinstance(rest[2], list) and len(rest[2]) == 1 and isinstance(rest[2][0], str)):
            raise FormulaError(f"{name}: expected (case term none-term (var) some-term)")
        v = rest[2][0]
        return Case(
            _parse_term(rest[0], bound, name),
            _parse_term(rest[1], bound, name),
            v,
            _parse_term(rest[3], bound | {v}, name),
        )
    if head in bound:
        raise FormulaError(f"{name}: variable {head} used as an operation")
    return Op(head, tuple(_parse_term(r, bound, name) for r in rest))


# -- signatures and observers ----------------------------------------------


@dataclass(frozen=True)
class Signature:
    """Operation names and their projection paths into the structure."""

    desc: Desc
    ops: tuple[tuple[str, str], ...]
    constants: tuple[Carrier, ...] = ()

    def op(self, name: str) -> tuple[str, Desc]:
        for n, path in self.ops:
            if n == name:
                return path, component(self.desc, path)
        raise FormulaError(f"unknown operation {name!r}")

    def constant(self, name: str) -> Carrier:
        for k in self.constants:
            if k.name == name:
                return k
        raise FormulaError(f"unknown constant carrier {name!r}")

    def sort(self, text: str) -> Desc:
        if text == "X":
            return XD
        if re.fullmatch(r"[^\s(),]+", text):
            return ConstD(self.constant(text))
        return parse_desc(text, {k.name: k for k in self.constants})


@dataclass(frozen=True, eq=False)
class Observer:
    name: str
    map: FinMap


def transport_observer(obs: Observer, e: Bijection) -> Observer:
    """Carry an observer on ``e.dom`` to ``e.cod`` by precomposing ``e^-1``."""
    return Observer(obs.name, e.backward.then(obs.map))


def descend_observer(obs: Observer, q: Quotient) -> Observer:
    """Factor an observer through a quotient; it must be constant on classes."""
    t = obs.map.table
    reps = np.array(q.partition.representatives, dtype=np.int64)
    factored = t[reps] if len(reps) else np.zeros(0, dtype=np.int64)
    clash = t != factored[q.map.table]
    if clash.any():
        x = int(np.argmax(clash))
        r = int(reps[q.map.table[x]])
        raise TransferError(
            "observer",
            f"observer {obs.name} separates {q.map.dom.label(x)} from {q.map.dom.label(r)} in one class",
        )
    return Observer(obs.name, FinMap(q.carrier, obs.map.cod, factored))


# -- sort checking and evaluation ------------------------------------------


@dataclass
class _Ctx:
    sig: Signature
    inst: StructuredInstance
    observers: Mapping[str, Observer]
    env: dict[str, Desc] = field(default_factory=dict)

    @property
    def X(self) -> Carrier:
        return self.inst.carrier


def _sort(t, ctx: _Ctx) -> Desc:
    X = ctx.X
    if isinstance(t, Var):
        return ctx.env[t.name]
    if isinstance(t, Const):
        K = ctx.sig.constant(t.carrier)
        K.index(t.label)
        return ConstD(K)
    if isinstance(t, Op):
        path, D = ctx.sig.op(t.name)
        for i, a in enumerate(t.args):
            if not isinstance(D, FunD):
                raise FormulaError(f"{t.name} is applied to too many arguments")
            got = _sort(a, ctx)
            if got != D.domain:
                raise FormulaError(f"argument {i + 1} of {t.name} has sort {got}, expected {D.domain}")
            D = D.codomain
        if isinstance(D, FunD):
            raise FormulaError(f"{t.name} is not fully applied")
        return D
    if isinstance(t, Obs):
        obs = ctx.observers.get(t.name)
        if obs is None:
            raise FormulaError(f"unknown observer {t.name!r}")
        got = _sort(t.arg, ctx)
        want = XD if obs.map.dom == X else ConstD(obs.map.dom)
        if got != want:
            raise FormulaError(f"observer {t.name} expects {want}, got {got}")
        return ConstD(obs.map.cod)
    if isinstance(t, Ctor):
        subs = [_sort(a, ctx) for a in t.args]
        if t.kind == "just":
            return MaybeD(subs[0])
        if t.kind == "nothing":
            return MaybeD(_NOTHING)
        if t.kind == "pair":
            if any(_has_bottom(x) for x in subs):
                raise FormulaError("a bare (nothing) inside a pair has no determined sort")
            return ProdD(subs[0], subs[1])
        if not isinstance(subs[0], ProdD):
            raise FormulaError(f"{t.kind} of non-pair sort {subs[0]}")
        return subs[0].left if t.kind == "fst" else subs[0].right
    if isinstance(t, Case):
        sc = _sort(t.scrutinee, ctx)
        if not isinstance(sc, MaybeD) or sc.inner is _NOTHING:
            raise FormulaError(f"case on non-maybe sort {sc}")
        a = _sort(t.none, ctx)
        saved = ctx.env.get(t.var)
        ctx.env[t.var] = sc.inner
        try:
            b = _sort(t.some, ctx)
        finally:
            if saved is None:
                ctx.env.pop(t.var, None)
            else:
                ctx.env[t.var] = saved
        return _unify(a, b, "case branches")
    raise FormulaError(f"unknown term {t!r}")


@dataclass(frozen=True)
class _Bottom(Desc):
    """Placeholder inner sort of a bare ``nothing``."""

    def __str__(self):
        return "?"


_NOTHING = _Bottom()


def _has_bottom(D: Desc) -> bool:
    if D is _NOTHING:
        return True
    if isinstance(D, MaybeD):
        return _has_bottom(D.inner)
    if isinstance(D, ProdD):
        return _has_bottom(D.left) or _has_bottom(D.right)
    return False


def _unify(a: Desc, b: Desc, what: str) -> Desc:
    if a == b and a is not _NOTHING:
        return a
    if isinstance(a, MaybeD) and isinstance(b, MaybeD):
        if a.inner is _NOTHING:
            return b
        if b.inner is _NOTHING:
            return a
        return MaybeD(_unify(a.inner, b.inner, what))
    if isinstance(a, ProdD) and isinstance(b, ProdD):
        return ProdD(_unify(a.left, b.left, what), _unify(a.right, b.right, what))
    raise FormulaError(f"{what} have different sorts {a} and {b}")


def check_formula(F: Formula, sig: Signature, inst: StructuredInstance, observers: Mapping[str, Observer]) -> dict[str, Desc]:
    """Sort-check a formula; returns the variable sorts."""
    if inst.desc != sig.desc:
        raise FormulaError("instance does not match the signature")
    ctx = _Ctx(sig, inst, observers)
    for n, srt in F.variables:
        D = sig.sort(srt)
        if isinstance(D, FunD) or not _enumerable(D):
            raise FormulaError(f"{F.name}: variable {n} has non-enumerable sort {D}")
        ctx.env[n] = D
    for g in F.guards:
        _unify(_sort(g.lhs, ctx), _sort(g.rhs, ctx), f"{F.name}: guard sides")
    _unify(_sort(F.lhs, ctx), _sort(F.rhs, ctx), f"{F.name}: equation sides")
    return dict(ctx.env)


def _enumerable(D: Desc) -> bool:
    if isinstance(D, FunD):
        return False
    if isinstance(D, (ProdD,)):
        return _enumerable(D.left) and _enumerable(D.right)
    if isinstance(D, MaybeD):
        return _enumerable(D.inner)
    return True


def _eval(t, ctx: _Ctx, env: dict[str, np.ndarray]) -> tuple[np.ndarray, Desc]:
    """Codes of ``t`` over a grid of assignments, with the term's sort."""
    X = ctx.X
    if isinstance(t, Var):
        return env[t.name], ctx.env[t.name]
    if isinstance(t, Const):
        K = ctx.sig.constant(t.carrier)
        return np.full((1, 1), K.index(t.label), dtype=np.int64), ConstD(K)
    if isinstance(t, Op):
        path, D = ctx.sig.op(t.name)
        value = project(ctx.inst.value, path)
        if not t.args:
            return np.full((1, 1), value_code(D, X, value), dtype=np.int64), D
        flat = None
        for a, dim in zip(t.args, value.data.shape):
            c, _ = _eval(a, ctx, env)
            flat = c if flat is None else flat * dim + c
            D = D.codomain
        # ops are fully applied, so the table is indexed by a single flat code
        return np.take(value.data.reshape(-1), flat).astype(np.int64, copy=False), D
    if isinstance(t, Obs):
        obs = ctx.observers[t.name]
        c, _ = _eval(t.arg, ctx, env)
        return obs.map.table[c], ConstD(obs.map.cod)
    if isinstance(t, Ctor):
        if t.kind == "nothing":
            return np.zeros((1, 1), dtype=np.int64), MaybeD(_NOTHING)
        if t.kind == "just":
            c, D = _eval(t.args[0], ctx, env)
            return c + 1, MaybeD(D)
        if t.kind == "pair":
            a, A = _eval(t.args[0], ctx, env)
            b, B = _eval(t.args[1], ctx, env)
            return a * size(B, X) + b, ProdD(A, B)
        c, D = _eval(t.args[0], ctx, env)
        hi, lo = np.divmod(c, size(D.right, X))
        return (hi, D.left) if t.kind == "fst" else (lo, D.right)
    sc, S = _eval(t.scrutinee, ctx, env)
    a, A = _eval(t.none, ctx, env)
    inner = env.copy()
    inner[t.var] = np.maximum(sc - 1, 0)
    saved = ctx.env.get(t.var)
    ctx.env[t.var] = S.inner
    try:
        b, B = _eval(t.some, ctx, inner)
    finally:
        if saved is None:
            ctx.env.pop(t.var, None)
        else:
            ctx.env[t.var] = saved
    D = _unify(A, B, "case branches")
    return np.where(sc == 0, a, b), D


def _render_code(D: Desc, X: Carrier, code: int) -> str:
    if isinstance(D, MaybeD) and D.inner is _NOTHING:
        return "nothing"
    return render(D, X, code_value(D, X, code))


@dataclass(frozen=True)
class AxiomResult:
    name: str
    holds: bool
    checked: int  # assignments whose guards held, up to the first failure
    counterexample: tuple[tuple[str, str], ...] | None = None
    lhs: str | None = None
    rhs: str | None = None

    def describe(self) -> str:
        if self.holds:
            return f"{self.name}: holds ({self.checked} assignments)"
        assign = ", ".join(f"{k}={v}" for k, v in self.counterexample)
        return f"{self.name}: fails at {assign}; {self.lhs} vs {self.rhs}"


def eval_axiom(
    F: Formula,
    sig: Signature,
    inst: StructuredInstance,
    observers: Mapping[str, Observer] | None = None,
    at: Mapping[str, str] | None = None,
) -> AxiomResult:
    """Decide ``F`` on ``inst`` exhaustively, or only at the assignment ``at``.

    Assignments are visited in lexicographic order of variable indices, so
    the reported counterexample is the least one.
    """
    observers = dict(observers or {})
    sorts = check_formula(F, sig, inst, observers)
    X = inst.carrier
    names = [n for n, _ in F.variables]
    dims = [size(sorts[n], X) for n in names]
    ctx = _Ctx(sig, inst, observers, dict(sorts))
    if at is not None:
        missing = [n for n in names if n not in at]
        if missing:
            raise FormulaError(f"{F.name}: no value given for {missing[0]}")
        env = {n: np.full((1, 1), _code_of_label(sorts[n], X, at[n]), dtype=np.int64) for n in names}
        chunks = [(env, (1, 1))]
    else:
        chunks = _chunks(names, dims)
    checked = 0
    for env, shape in chunks:
        live = np.ones((1, 1), dtype=bool)
        for g in F.guards:
            a, _ = _eval(g.lhs, ctx, env)
            b, _ = _eval(g.rhs, ctx, env)
            live = live & ((a != b) if g.negated else (a == b))
        lhs, L = _eval(F.lhs, ctx, env)
        rhs, Rs = _eval(F.rhs, ctx, env)
        live = np.broadcast_to(live, shape).ravel()
        bad = live & np.broadcast_to(lhs != rhs, shape).ravel()
        if bad.any():
            k = int(np.argmax(bad))
            checked += int(live[:k].sum())
            D = _unify(L, Rs, "sides")
            pick = {name: int(np.broadcast_to(env[name], shape).ravel()[k]) for name in names}
            assign = tuple((name, _render_code(sorts[name], X, pick[name])) for name in names)
            lv = int(np.broadcast_to(lhs, shape).ravel()[k])
            rv = int(np.broadcast_to(rhs, shape).ravel()[k])
            return AxiomResult(F.name, False, checked, assign, _render_code(D, X, lv), _render_code(D, X, rv))
        checked += int(live.sum())
    return AxiomResult(F.name, True, checked)


def _chunks(names: list[str], dims: list[int]):
    """Blocks of assignments in lexicographic order.

    Each block is a grid: rows range over a run of values of the leading
    variables, columns over all values of the trailing ones. Variables are
    given as arrays that broadcast against the grid, so subterms that only
    mention trailing variables are evaluated once per row block.
    """
    split = len(dims)
    while split > 0 and math.prod(dims[split - 1 :]) <= _CHUNK:
        split -= 1
    inner = math.prod(dims[split:])
    tail = np.unravel_index(np.arange(inner, dtype=np.int64), dims[split:]) if split < len(dims) else ()
    tail_env = {n: np.asarray(c, dtype=np.int64).reshape(1, -1) for n, c in zip(names[split:], tail)}
    outer = math.prod(dims[:split])
    step = max(1, _CHUNK // max(inner, 1))
    for start in range(0, outer, step):
        flat = np.arange(start, min(outer, start + step), dtype=np.int64)
        head = np.unravel_index(flat, dims[:split]) if split else ()
        env = {n: np.asarray(c, dtype=np.int64).reshape(-1, 1) for n, c in zip(names[:split], head)}
        env.update(tail_env)
        yield env, (len(flat), inner)


def _code_of_label(D: Desc, X: Carrier, label: str) -> int:
    if isinstance(D, VarD):
        return X.index(label)
    if isinstance(D, ConstD):
        return D.carrier.index(label)
    return interpret(D, X).carrier.index(label)


# -- structured equivalences and transfer ----------------------------------


def check_structured_equiv(D: Desc, e: Bijection, s: Any, t: Any) -> Mismatch | None:
    """``None`` when ``(e, s, t)`` is a structured equivalence, else where it breaks."""
    return equiv_check(D, e, s, t)


@dataclass(frozen=True)
class AxiomTransfer:
    name: str
    left: AxiomResult
    right: AxiomResult

    @property
    def agree(self) -> bool:
        return self.left.holds == self.right.holds


@dataclass(frozen=True)
class TransferReport:
    rows: tuple[AxiomTransfer, ...]

    @property
    def ok(self) -> bool:
        return all(r.left.holds and r.right.holds for r in self.rows)


def transfer_axioms(
    axioms: list[Formula],
    sig: Signature,
    e: Bijection,
    left: StructuredInstance,
    right: StructuredInstance,
    observers: Mapping[str, Observer] | None = None,
    right_observers: Mapping[str, Observer] | None = None,
) -> TransferReport:
    """Carry axioms verified on ``left`` over to ``right`` along ``e``.

    The equivalence check looks only at the structure. Observers on the
    left carrier are transported along ``e``; if ``right_observers`` are
    also given they must agree with the transported ones.
    """
    if e.dom != left.carrier or e.cod != right.carrier:
        raise CarrierMismatch("bijection does not run between the instance carriers")
    bad = check_structured_equiv(sig.desc, e, left.value, right.value)
    if bad is not None:
        raise TransferError("structure", f"not a structured equivalence: {bad}")
    observers = dict(observers or {})
    moved = {
        k: transport_observer(o, e) if o.map.dom == left.carrier else o for k, o in observers.items()
    }
    for k, o in (right_observers or {}).items():
        if k in moved and not np.array_equal(moved[k].map.table, o.map.table):
            x = int(np.argmax(moved[k].map.table != o.map.table))
            raise TransferError(
                "observer", f"observer {k} does not respect the equivalence at {right.carrier.label(x)}"
            )
    rows = []
    for F in axioms:
        lres = eval_axiom(F, sig, left, observers)
        if not lres.holds:
            raise TransferError("precondition", f"axiom does not hold on the source: {lres.describe()}")
        rres = eval_axiom(F, sig, right, moved)
        if not rres.holds:
            raise TransferError(
                "fragment",
                f"axiom {F.name} fails after transfer although the structures are equivalent; "
                f"it is outside the invariant fragment: {rres.describe()}",
            )
        rows.append(AxiomTransfer(F.name, lres, rres))
    return TransferReport(tuple(rows))


@dataclass(frozen=True)
class GoalResult:
    equal: bool
    left_image: str
    right_image: str
    detail: str | None = None


def replace_goal(
    e: Bijection, x1: int, x2: int, explain: Callable[[Any, Any], str] | None = None
) -> GoalResult:
    """Decide ``x1 = x2`` by comparing images under ``e``."""
    a, b = e.forward(x1), e.forward(x2)
    equal = a == b
    detail = None
    if not equal and explain is not None:
        detail = explain(e.cod.value(a), e.cod.value(b))
    return GoalResult(equal, e.cod.label(a), e.cod.label(b), detail)
