"""Structure descriptions, their finite interpretation, and the two liftings.

A description is a small AST over the grammar ``X | const(K) | prod(S,T) |
fun(S,T) | maybe(S)``. Its interpretation at a carrier is enumerated in a
fixed lexicographic order. Values are plain Python data:

* ``X`` and ``const(K)``: an ``int`` element index
* ``prod``: a 2-tuple
* ``maybe``: ``None`` or :class:`Just`
* ``fun``: a :class:`FunTable` whose ``data`` array holds, for every domain
  point (in enumeration order), the *code* of the image: a nested array when
  the codomain is itself a function, otherwise the image's index in the
  codomain interpretation.

Two independent ways of lifting a relation are provided: :func:`rel_table`
builds the whole boolean table over two interpretations, and
:func:`rel_check` decides single pairs without enumerating function spaces.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator

import numpy as np

from .finrel import (
    Bijection,
    Carrier,
    CarrierMismatch,
    FinMap,
    FinRelError,
    Rel,
    graph_rel,
    inverse_rel,
)

DEFAULT_CAP = 100_000
_CHUNK = 1 << 22


class StructureError(FinRelError):
    pass


class CapExceeded(StructureError):
    def __init__(self, desc: "Desc", size: int, cap: int):
        super().__init__(f"interpretation of {desc} has {size} elements, cap is {cap}")
        self.desc = desc
        self.size = size
        self.cap = cap


class NotAdmissible(StructureError):
    def __init__(self, desc: "Desc", where: "Desc"):
        super().__init__(f"{desc} is not admissible: function domain {where} is not positive")
        self.desc = desc
        self.where = where


# -- the AST ---------------------------------------------------------------


class Desc:
    __slots__ = ()


@dataclass(frozen=True)
class VarD(Desc):
    def __str__(self):
        return "X"


@dataclass(frozen=True)
class ConstD(Desc):
    carrier: Carrier

    def __str__(self):
        return f"const({self.carrier.name})"


@dataclass(frozen=True)
class ProdD(Desc):
    left: Desc
    right: Desc

    def __str__(self):
        return f"prod({self.left},{self.right})"


@dataclass(frozen=True)
class FunD(Desc):
    domain: Desc
    codomain: Desc

    def __str__(self):
        return f"fun({self.domain},{self.codomain})"


@dataclass(frozen=True)
class MaybeD(Desc):
    inner: Desc

    def __str__(self):
        return f"maybe({self.inner})"


X = VarD()


def prod(*parts: Desc) -> Desc:
    """Right-nested product ``prod(a, prod(b, c))``."""
    if len(parts) == 1:
        return parts[0]
    return ProdD(parts[0], prod(*parts[1:]))


def is_positive(D: Desc) -> bool:
    if isinstance(D, (VarD, ConstD)):
        return True
    if isinstance(D, ProdD):
        return is_positive(D.left) and is_positive(D.right)
    if isinstance(D, MaybeD):
        return is_positive(D.inner)
    return False


def non_positive_domain(D: Desc) -> Desc | None:
    """The first function domain that is not positive, if any."""
    if isinstance(D, ProdD):
        return non_positive_domain(D.left) or non_positive_domain(D.right)
    if isinstance(D, MaybeD):
        return non_positive_domain(D.inner)
    if isinstance(D, FunD):
        if not is_positive(D.domain):
            return D.domain
        return non_positive_domain(D.codomain)
    return None


def is_admissible(D: Desc) -> bool:
    return non_positive_domain(D) is None


def require_admissible(D: Desc) -> None:
    where = non_positive_domain(D)
    if where is not None:
        raise NotAdmissible(D, where)


def depth(D: Desc) -> int:
    if isinstance(D, (VarD, ConstD)):
        return 1
    if isinstance(D, (ProdD, FunD)):
        return 1 + max(depth(c) for c in _children(D))
    return 1 + depth(D.inner)


def _children(D: Desc) -> tuple[Desc, ...]:
    if isinstance(D, ProdD):
        return (D.left, D.right)
    if isinstance(D, FunD):
        return (D.domain, D.codomain)
    if isinstance(D, MaybeD):
        return (D.inner,)
    return ()


def constants(D: Desc) -> list[Carrier]:
    out: list[Carrier] = []
    if isinstance(D, ConstD):
        out.append(D.carrier)
    for c in _children(D):
        for k in constants(c):
            if k not in out:
                out.append(k)
    return out


def component(D: Desc, path: str) -> Desc:
    """Follow a projection path of ``l``/``r`` steps through nested products."""
    for step in path:
        if not isinstance(D, ProdD):
            raise StructureError(f"path {path!r} projects out of non-product {D}")
        D = D.left if step == "l" else D.right
    return D


def project(value: Any, path: str) -> Any:
    for step in path:
        value = value[0] if step == "l" else value[1]
    return value


_TOKEN = re.compile(r"\s*(?:(?P<word>[A-Za-z_][\w\-.]*)|(?P<punct>[(),]))")


def parse_desc(text: str, constants: dict[str, Carrier] | None = None) -> Desc:
    """Parse ``X``, ``const(K)``, ``prod(D,D)``, ``fun(D,D)``, ``maybe(D)``."""
    constants = constants or {}
    tokens: list[tuple[str, int]] = []
    pos = 0
    text_stripped = text.rstrip()
    while pos < len(text_stripped):
        m = _TOKEN.match(text_stripped, pos)
        if not m:
            raise StructureError(f"unexpected character {text_stripped[pos]!r} at offset {pos}")
        tokens.append((m.group("word") or m.group("punct"), m.start(m.lastgroup)))
        pos = m.end()
    it = 0

    def expect(tok: str) -> None:
        nonlocal it
        if it >= len(tokens) or tokens[it][0] != tok:
            where = tokens[it][1] if it < len(tokens) else len(text)
            raise StructureError(f"expected {tok!r} at offset {where} in {text!r}")
        it += 1

    def parse() -> Desc:
        nonlocal it
        if it >= len(tokens):
            raise StructureError(f"unexpected end of description {text!r}")
        word, where = tokens[it]
        it += 1
        if word == "X":
            return X
        if word == "const":
            expect("(")
            if it >= len(tokens):
                raise StructureError(f"missing constant name in {text!r}")
            name, npos = tokens[it]
            it += 1
            if name not in constants:
                raise StructureError(f"unknown constant carrier {name!r} at offset {npos}")
            expect(")")
            return ConstD(constants[name])
        if word in ("prod", "fun"):
            expect("(")
            a = parse()
            expect(",")
            b = parse()
            expect(")")
            return ProdD(a, b) if word == "prod" else FunD(a, b)
        if word == "maybe":
            expect("(")
            a = parse()
            expect(")")
            return MaybeD(a)
        raise StructureError(f"unexpected {word!r} at offset {where} in {text!r}")

    D = parse()
    if it != len(tokens):
        raise StructureError(f"trailing input at offset {tokens[it][1]} in {text!r}")
    return D


# -- values ----------------------------------------------------------------


class Just:
    __slots__ = ("value",)

    def __init__(self, value: Any):
        self.value = value

    def __eq__(self, other):
        return isinstance(other, Just) and self.value == other.value

    def __hash__(self):
        return hash(("just", self.value))

    def __repr__(self):
        return f"Just({self.value!r})"


class FunTable:
    """Immutable finite function table; see the module docstring for ``data``."""

    __slots__ = ("data", "_hash")

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.dtype.kind not in "iu":
            arr = arr.astype(np.int64)
        if arr.flags.writeable or not arr.flags.c_contiguous:
            arr = np.array(arr, order="C")
            arr.setflags(write=False)
        self.data = arr
        self._hash = None

    def __eq__(self, other):
        return (
            isinstance(other, FunTable)
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.data.shape, self.data.astype(np.int64).tobytes()))
        return self._hash

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"FunTable({self.data.tolist()!r})"

    def row(self, i: int) -> "FunTable":
        return FunTable(self.data[i])


# -- interpretation --------------------------------------------------------


def size(D: Desc, X: Carrier) -> int:
    if isinstance(D, VarD):
        return len(X)
    if isinstance(D, ConstD):
        return len(D.carrier)
    if isinstance(D, ProdD):
        return size(D.left, X) * size(D.right, X)
    if isinstance(D, MaybeD):
        return 1 + size(D.inner, X)
    return size(D.codomain, X) ** size(D.domain, X)


def shape(D: Desc, X: Carrier) -> tuple[int, ...]:
    """Array shape of the code of a ``D``-value."""
    if isinstance(D, FunD):
        return (size(D.domain, X),) + shape(D.codomain, X)
    return ()


@dataclass(frozen=True, eq=False)
class Space:
    """The enumerated interpretation of a description at a carrier."""

    desc: Desc
    base: Carrier
    values: tuple[Any, ...]
    index: dict
    carrier: Carrier
    codes: np.ndarray | None  # for fun(S,T): codomain index per domain point

    def __len__(self):
        return len(self.values)


_spaces: dict[tuple[Desc, Carrier], Space] = {}


def _smallest_over_cap(D: Desc, X: Carrier, cap: int) -> Desc:
    for c in _children(D):
        if size(c, X) > cap:
            return _smallest_over_cap(c, X, cap)
    return D


def interpret(D: Desc, X: Carrier, cap: int = DEFAULT_CAP) -> Space:
    key = (D, X)
    space = _spaces.get(key)
    if space is not None:
        return space
    n = size(D, X)
    if n > cap:
        where = _smallest_over_cap(D, X, cap)
        raise CapExceeded(where, size(where, X), cap)
    codes = None
    if isinstance(D, VarD):
        values: tuple = tuple(range(len(X)))
    elif isinstance(D, ConstD):
        values = tuple(range(len(D.carrier)))
    elif isinstance(D, ProdD):
        a, b = interpret(D.left, X, cap), interpret(D.right, X, cap)
        values = tuple(itertools.product(a.values, b.values))
    elif isinstance(D, MaybeD):
        a = interpret(D.inner, X, cap)
        values = (None,) + tuple(Just(v) for v in a.values)
    else:
        dom = interpret(D.domain, X, cap)
        cod = interpret(D.codomain, X, cap)
        codes = np.array(list(itertools.product(range(len(cod)), repeat=len(dom))), dtype=np.int64)
        codes = codes.reshape(n, len(dom))
        if isinstance(D.codomain, FunD):
            stacked = np.stack([v.data for v in cod.values]) if len(cod) else np.zeros((0,) + shape(D.codomain, X), np.int64)
            values = tuple(FunTable(stacked[row]) for row in codes)
        else:
            values = tuple(FunTable(row) for row in codes)
    index = {v: i for i, v in enumerate(values)}
    labels = tuple(render(D, X, v) for v in values)
    carrier = Carrier(f"{D}@{X.name}", labels, values)
    space = Space(D, X, values, index, carrier, codes)
    _spaces[key] = space
    return space


def value_code(D: Desc, X: Carrier, v: Any) -> int:
    """Index of a non-function value in the enumeration, computed arithmetically."""
    if isinstance(D, (VarD, ConstD)):
        return int(v)
    if isinstance(D, ProdD):
        return value_code(D.left, X, v[0]) * size(D.right, X) + value_code(D.right, X, v[1])
    if isinstance(D, MaybeD):
        return 0 if v is None else 1 + value_code(D.inner, X, v.value)
    return interpret(D, X).index[v]


def code_value(D: Desc, X: Carrier, code: int) -> Any:
    """Inverse of :func:`value_code`."""
    code = int(code)
    if isinstance(D, (VarD, ConstD)):
        return code
    if isinstance(D, ProdD):
        a, b = divmod(code, size(D.right, X))
        return (code_value(D.left, X, a), code_value(D.right, X, b))
    if isinstance(D, MaybeD):
        return None if code == 0 else Just(code_value(D.inner, X, code - 1))
    return interpret(D, X).values[code]


def encode(D: Desc, X: Carrier, v: Any):
    if isinstance(D, FunD):
        return v.data
    return value_code(D, X, v)


def decode(D: Desc, X: Carrier, code) -> Any:
    if isinstance(D, FunD):
        return FunTable(code)
    return code_value(D, X, code)


def apply(F: FunD, X: Carrier, f: FunTable, arg: Any) -> Any:
    """Apply a function value to a decoded argument."""
    i = interpret(F.domain, X).index[arg]
    return decode(F.codomain, X, f.data[i])


def tabulate(F: FunD, X: Carrier, fn: Callable[[Any], Any]) -> FunTable:
    """Build a function value from a Python callable on decoded values."""
    dom = interpret(F.domain, X)
    codes = [encode(F.codomain, X, fn(p)) for p in dom.values]
    if isinstance(F.codomain, FunD):
        data = np.stack(codes) if codes else np.zeros((0,) + shape(F.codomain, X), np.int64)
    else:
        data = np.array(codes, dtype=np.int64)
    return FunTable(data)


def render(D: Desc, X: Carrier, v: Any) -> str:
    if isinstance(D, VarD):
        return X.label(v)
    if isinstance(D, ConstD):
        return D.carrier.label(v)
    if isinstance(D, ProdD):
        return f"({render(D.left, X, v[0])}, {render(D.right, X, v[1])})"
    if isinstance(D, MaybeD):
        return "nothing" if v is None else f"just {render(D.inner, X, v.value)}"
    dom = interpret(D.domain, X)
    return "{" + ", ".join(
        f"{dom.carrier.label(i)}: {render(D.codomain, X, decode(D.codomain, X, v.data[i]))}"
        for i in range(len(dom))
    ) + "}"


def check_value(D: Desc, X: Carrier, v: Any) -> None:
    """Raise :class:`StructureError` unless ``v`` is well-shaped for ``D`` at ``X``."""
    if isinstance(D, (VarD, ConstD)):
        n = len(X) if isinstance(D, VarD) else len(D.carrier)
        if not isinstance(v, (int, np.integer)) or not 0 <= v < n:
            raise StructureError(f"{v!r} is not an element index for {D}")
    elif isinstance(D, ProdD):
        if not isinstance(v, tuple) or len(v) != 2:
            raise StructureError(f"{v!r} is not a pair for {D}")
        check_value(D.left, X, v[0])
        check_value(D.right, X, v[1])
    elif isinstance(D, MaybeD):
        if v is not None:
            if not isinstance(v, Just):
                raise StructureError(f"{v!r} is not nothing/just for {D}")
            check_value(D.inner, X, v.value)
    else:
        if not isinstance(v, FunTable):
            raise StructureError(f"{v!r} is not a function table for {D}")
        if v.data.shape != shape(D, X):
            raise StructureError(f"function table for {D} has shape {v.data.shape}, expected {shape(D, X)}")
        leaf = D
        while isinstance(leaf, FunD):
            leaf = leaf.codomain
        if v.data.size and (v.data.min() < 0 or v.data.max() >= size(leaf, X)):
            raise StructureError(f"function table for {D} has out-of-range entries")


@dataclass(frozen=True, eq=False)
class StructuredInstance:
    carrier: Carrier
    desc: Desc
    value: Any

    def __post_init__(self):
        check_value(self.desc, self.carrier, self.value)

    def component(self, path: str) -> Any:
        return project(self.value, path)


# -- memo helpers ----------------------------------------------------------


def _memo(obj) -> dict:
    d = obj.__dict__.get("_memo")
    if d is None:
        d = {}
        obj.__dict__["_memo"] = d
    return d


_rel_tables: dict = {}


# -- relation lifting: whole tables ----------------------------------------


def rel_table(D: Desc, R: Rel, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Boolean table of the lifted relation over ``interpret(D, dom) x interpret(D, cod)``."""
    require_admissible(D)
    return _rel_table(D, R, cap)


def _rel_table(D: Desc, R: Rel, cap: int) -> np.ndarray:
    key = (D, R.dom, R.cod, R.table.tobytes())
    hit = _rel_tables.get(key)
    if hit is not None:
        return hit
    if isinstance(D, VarD):
        out = R.table
    elif isinstance(D, ConstD):
        out = np.eye(len(D.carrier), dtype=bool)
    elif isinstance(D, ProdD):
        A, B = _rel_table(D.left, R, cap), _rel_table(D.right, R, cap)
        na, ma = A.shape
        nb, mb = B.shape
        out = (A[:, None, :, None] & B[None, :, None, :]).reshape(na * nb, ma * mb)
    elif isinstance(D, MaybeD):
        A = _rel_table(D.inner, R, cap)
        out = np.zeros((A.shape[0] + 1, A.shape[1] + 1), dtype=bool)
        out[0, 0] = True
        out[1:, 1:] = A
    else:
        P = _rel_table(D.domain, R, cap)
        T = _rel_table(D.codomain, R, cap)
        F = interpret(D, R.dom, cap).codes
        G = interpret(D, R.cod, cap).codes
        out = np.ones((len(F), len(G)), dtype=bool)
        for i, k in np.argwhere(P):
            out &= T[F[:, i]][:, G[:, k]]
    out = np.ascontiguousarray(out)
    out.setflags(write=False)
    if len(_rel_tables) > 20000:
        _rel_tables.clear()
    _rel_tables[key] = out
    return out


def rel_lift(D: Desc, R: Rel, cap: int = DEFAULT_CAP) -> Rel:
    """The lifted relation as a :class:`Rel` between interpretation carriers."""
    table = rel_table(D, R, cap)
    return Rel(interpret(D, R.dom, cap).carrier, interpret(D, R.cod, cap).carrier, table)


# -- relation lifting: single pairs ----------------------------------------


@dataclass(frozen=True)
class Mismatch:
    """Where a lifted relation fails: a path of steps and the two sides."""

    path: tuple[str, ...]
    left: str
    right: str

    def __str__(self):
        where = " / ".join(self.path) if self.path else "top"
        return f"at {where}: {self.left} vs {self.right}"


def rel_check(D: Desc, R: Rel, s: Any, t: Any, method: str = "auto") -> Mismatch | None:
    """Decide the lifted relation on one pair; ``None`` means it holds.

    ``method`` is ``"labels"`` (requires a zigzag-complete ``R``; linear in
    the function tables), ``"pairs"`` (direct quantifier expansion) or
    ``"auto"``.
    """
    require_admissible(D)
    if method == "auto":
        method = "labels" if R.zigzag_labels is not None else "pairs"
    if method == "labels":
        ctx = _label_ctx(R)
        if ctx.label(D, 0, s) == ctx.label(D, 1, t) != -1:
            return None
        return ctx.explain(D, s, t, ())
    return _pairs_check(D, R, s, t, ())


def rel_holds(D: Desc, R: Rel, s: Any, t: Any, method: str = "auto") -> bool:
    return rel_check(D, R, s, t, method) is None


def _positive_table(D: Desc, R: Rel) -> np.ndarray:
    return _rel_table(D, R, DEFAULT_CAP)


def _pairs_check(D: Desc, R: Rel, s, t, path: tuple[str, ...]) -> Mismatch | None:
    X, Y = R.dom, R.cod
    if isinstance(D, VarD):
        return None if R.table[s, t] else Mismatch(path, X.label(s), Y.label(t))
    if isinstance(D, ConstD):
        return None if s == t else Mismatch(path, D.carrier.label(s), D.carrier.label(t))
    if isinstance(D, ProdD):
        return _pairs_check(D.left, R, s[0], t[0], path + ("fst",)) or _pairs_check(
            D.right, R, s[1], t[1], path + ("snd",)
        )
    if isinstance(D, MaybeD):
        if s is None and t is None:
            return None
        if s is None or t is None:
            return Mismatch(path, render(D, X, s), render(D, Y, t))
        return _pairs_check(D.inner, R, s.value, t.value, path + ("just",))
    P = _positive_table(D.domain, R)
    pairs = np.argwhere(P)
    if not len(pairs):
        return None
    T = D.codomain
    if not isinstance(T, FunD):
        TT = _rel_table(T, R, DEFAULT_CAP)
        ok = TT[s.data[pairs[:, 0]], t.data[pairs[:, 1]]]
        if ok.all():
            return None
        i, k = pairs[int(np.argmin(ok))]
        step = _arg_step(D.domain, X, Y, i, k)
        return _pairs_check(
            T, R, decode(T, X, s.data[i]), decode(T, Y, t.data[k]), path + (step,)
        ) or Mismatch(path + (step,), "?", "?")
    for i, k in pairs:
        bad = _pairs_check(T, R, FunTable(s.data[i]), FunTable(t.data[k]), path + (_arg_step(D.domain, X, Y, i, k),))
        if bad is not None:
            return bad
    return None


def _arg_step(P: Desc, X: Carrier, Y: Carrier, i: int, k: int) -> str:
    return f"arg {interpret(P, X).carrier.label(int(i))} ~ {interpret(P, Y).carrier.label(int(k))}"


class _LabelCtx:
    """Block labels for values under the lifting of a zigzag-complete relation.

    Every lifted relation of an admissible description is again a union of
    complete bipartite blocks, so two values are related exactly when their
    labels agree and are not ``-1``. Labels of compound values are interned
    tuples; side ``0`` is the domain carrier, side ``1`` the codomain.
    """

    def __init__(self, R: Rel):
        self.R = R
        self.sides = (R.dom, R.cod)
        self.base = R.zigzag_labels
        self.intern: dict = {}
        self.space_labels: dict = {}
        self.blocks: dict = {}

    def _id(self, key) -> int:
        got = self.intern.get(key)
        if got is None:
            got = len(self.intern)
            self.intern[key] = got
        return got

    def label(self, D: Desc, side: int, v) -> int:
        if isinstance(D, VarD):
            return int(self.base[side][v])
        if isinstance(D, ConstD):
            return int(v)
        if isinstance(D, ProdD):
            a = self.label(D.left, side, v[0])
            b = self.label(D.right, side, v[1])
            return -1 if a < 0 or b < 0 else self._id(("p", a, b))
        if isinstance(D, MaybeD):
            if v is None:
                return self._id(("n",))
            a = self.label(D.inner, side, v.value)
            return -1 if a < 0 else self._id(("j", a))
        return int(self.codes(D, side, v.data[None])[0])

    def of_space(self, D: Desc, side: int) -> np.ndarray:
        key = (D, side)
        got = self.space_labels.get(key)
        if got is None:
            if isinstance(D, VarD):
                got = np.asarray(self.base[side])
            elif isinstance(D, ConstD):
                got = np.arange(len(D.carrier))
            else:
                sp = interpret(D, self.sides[side])
                got = np.array([self.label(D, side, v) for v in sp.values], dtype=np.int64)
            self.space_labels[key] = got
        return got

    def _blocks(self, P: Desc):
        got = self.blocks.get(P)
        if got is None:
            l0, l1 = self.of_space(P, 0), self.of_space(P, 1)
            common = sorted(set(l0[l0 >= 0].tolist()) & set(l1[l1 >= 0].tolist()))
            got = (
                common,
                [np.flatnonzero(l0 == k) for k in common],
                [np.flatnonzero(l1 == k) for k in common],
            )
            self.blocks[P] = got
        return got

    def codes(self, D: Desc, side: int, codes: np.ndarray) -> np.ndarray:
        """Labels for a batch of codes of ``D``-values (first axis is the batch)."""
        if not isinstance(D, FunD):
            return self.of_space(D, side)[codes]
        batch, n_dom = codes.shape[0], codes.shape[1]
        step = max(1, _CHUNK // max(int(np.prod(codes.shape[1:])), 1))
        if batch > step:
            return np.concatenate([self.codes(D, side, codes[i : i + step]) for i in range(0, batch, step)])
        inner = self.codes(D.codomain, side, codes.reshape((batch * n_dom,) + codes.shape[2:]))
        inner = inner.reshape(batch, n_dom)
        common, blocks0, blocks1 = self._blocks(D.domain)
        blocks = blocks0 if side == 0 else blocks1
        cols = np.empty((batch, len(common)), dtype=np.int64)
        ok = np.ones(batch, dtype=bool)
        for j, blk in enumerate(blocks):
            sub = inner[:, blk]
            lo, hi = sub.min(axis=1), sub.max(axis=1)
            ok &= (lo == hi) & (lo >= 0)
            cols[:, j] = lo
        out = np.full(batch, -1, dtype=np.int64)
        if batch <= 8:
            for b in np.flatnonzero(ok):
                out[b] = self._id(("f",) + tuple(cols[b].tolist()))
        elif ok.any():
            rows, inv = np.unique(cols[ok], axis=0, return_inverse=True)
            ids = np.array([self._id(("f",) + tuple(r)) for r in rows.tolist()], dtype=np.int64)
            out[ok] = ids[np.asarray(inv).reshape(-1)]
        return out

    def explain(self, D: Desc, s, t, path) -> Mismatch:
        X, Y = self.sides
        if isinstance(D, (VarD, ConstD)):
            return Mismatch(path, render(D, X, s), render(D, Y, t))
        if isinstance(D, ProdD):
            if self.label(D.left, 0, s[0]) != self.label(D.left, 1, t[0]) or self.label(D.left, 0, s[0]) < 0:
                return self.explain(D.left, s[0], t[0], path + ("fst",))
            return self.explain(D.right, s[1], t[1], path + ("snd",))
        if isinstance(D, MaybeD):
            if s is None or t is None:
                return Mismatch(path, render(D, X, s), render(D, Y, t))
            return self.explain(D.inner, s.value, t.value, path + ("just",))
        T = D.codomain
        _, blocks0, blocks1 = self._blocks(D.domain)
        for b0, b1 in zip(blocks0, blocks1):
            ls = self.codes(T, 0, s.data[b0])
            lt = self.codes(T, 1, t.data[b1])
            for i, li in zip(b0, ls):
                for k, lk in zip(b1, lt):
                    if li != lk or li < 0:
                        step = _arg_step(D.domain, X, Y, i, k)
                        return self.explain(
                            T, decode(T, X, s.data[i]), decode(T, Y, t.data[k]), path + (step,)
                        )
        raise AssertionError("labels disagree but no failing argument pair found")


def _label_ctx(R: Rel) -> _LabelCtx:
    memo = _memo(R)
    ctx = memo.get("labels")
    if ctx is None:
        if R.zigzag_labels is None:
            raise StructureError("label method needs a zigzag-complete relation")
        ctx = memo["labels"] = _LabelCtx(R)
    return ctx


# -- equivalence lifting ---------------------------------------------------


def equiv_holds(D: Desc, e: Bijection, s: Any, t: Any) -> bool:
    """Structured-equivalence predicate, by direct structural recursion on ``e``."""
    return equiv_check(D, e, s, t) is None


def equiv_check(D: Desc, e: Bijection, s, t, path: tuple[str, ...] = ()) -> Mismatch | None:
    X, Y = e.dom, e.cod
    if isinstance(D, VarD):
        return None if e.forward(s) == t else Mismatch(path, X.label(s), Y.label(t))
    if isinstance(D, ConstD):
        return None if s == t else Mismatch(path, D.carrier.label(s), D.carrier.label(t))
    if isinstance(D, ProdD):
        return equiv_check(D.left, e, s[0], t[0], path + ("fst",)) or equiv_check(
            D.right, e, s[1], t[1], path + ("snd",)
        )
    if isinstance(D, MaybeD):
        if s is None and t is None:
            return None
        if s is None or t is None:
            return Mismatch(path, render(D, X, s), render(D, Y, t))
        return equiv_check(D.inner, e, s.value, t.value, path + ("just",))
    pairs = np.argwhere(_equiv_table(D.domain, e))
    T = D.codomain
    if isinstance(T, (VarD, ConstD)):
        left = s.data[pairs[:, 0]]
        ok = (e.forward.table[left] if isinstance(T, VarD) else left) == t.data[pairs[:, 1]]
        bad = np.flatnonzero(~ok)
        if not len(bad):
            return None
        pairs = pairs[bad[:1]]
    for i, k in pairs:
        sub = equiv_check(
            T, e, decode(T, X, s.data[i]), decode(T, Y, t.data[k]), path + (_arg_step(D.domain, X, Y, i, k),)
        )
        if sub is not None:
            return sub
    return None


def _equiv_table(D: Desc, e: Bijection) -> np.ndarray:
    memo = _memo(e)
    key = ("iota", D)
    got = memo.get(key)
    if got is None:
        if isinstance(D, VarD):
            got = graph_rel(e.forward).table
        else:
            a, b = interpret(D, e.dom), interpret(D, e.cod)
            got = np.array(
                [[equiv_holds(D, e, s, t) for t in b.values] for s in a.values], dtype=bool
            ).reshape(len(a), len(b))
        memo[key] = got
    return got


def equiv_lift(D: Desc, e: Bijection) -> Rel:
    if not (isinstance(e, Bijection)):
        raise CarrierMismatch("equiv_lift needs a bijection")
    table = _equiv_table(D, e)
    return Rel(interpret(D, e.dom).carrier, interpret(D, e.cod).carrier, table)


# -- actions ---------------------------------------------------------------


def act_value(D: Desc, e: Bijection, v: Any) -> Any:
    """Functorial action of a bijection on one ``D``-value."""
    if isinstance(D, VarD):
        return e.forward(v)
    if isinstance(D, ConstD):
        return v
    if isinstance(D, ProdD):
        return (act_value(D.left, e, v[0]), act_value(D.right, e, v[1]))
    if isinstance(D, MaybeD):
        return None if v is None else Just(act_value(D.inner, e, v.value))
    back = _action_table(D.domain, e.inverse())
    return FunTable(_act_codes(D.codomain, e, v.data[back]))


def _act_codes(D: Desc, e: Bijection, codes: np.ndarray) -> np.ndarray:
    if isinstance(D, VarD):
        return e.forward.table[codes]
    if isinstance(D, ConstD):
        return codes
    if not isinstance(D, FunD):
        return _action_table(D, e)[codes]
    back = _action_table(D.domain, e.inverse())
    lead = codes.ndim - len(shape(D, e.dom))
    permuted = np.take(codes, back, axis=lead)
    return _act_codes(D.codomain, e, permuted)


def _action_table(D: Desc, e: Bijection) -> np.ndarray:
    if isinstance(D, VarD):
        return e.forward.table
    if isinstance(D, ConstD):
        return np.arange(len(D.carrier))
    memo = _memo(e)
    key = ("act", D)
    got = memo.get(key)
    if got is None:
        a, b = interpret(D, e.dom), interpret(D, e.cod)
        got = np.array([b.index[act_value(D, e, v)] for v in a.values], dtype=np.int64)
        memo[key] = got
    return got


def equiv_action(D: Desc, e: Bijection) -> Bijection:
    a, b = interpret(D, e.dom), interpret(D, e.cod)
    fwd = FinMap(a.carrier, b.carrier, _action_table(D, e))
    bwd = FinMap(b.carrier, a.carrier, _action_table(D, e.inverse()))
    return Bijection(fwd, bwd)


def fun_act_value(P: Desc, f: FinMap, v: Any) -> Any:
    """Covariant action of an arbitrary map on a positive description."""
    if isinstance(P, VarD):
        return f(v)
    if isinstance(P, ConstD):
        return v
    if isinstance(P, ProdD):
        return (fun_act_value(P.left, f, v[0]), fun_act_value(P.right, f, v[1]))
    if isinstance(P, MaybeD):
        return None if v is None else Just(fun_act_value(P.inner, f, v.value))
    raise StructureError(f"{P} is not positive; no action on arbitrary maps")


def fun_action(P: Desc, f: FinMap) -> FinMap:
    if not is_positive(P):
        raise StructureError(f"{P} is not positive; no action on arbitrary maps")
    a, b = interpret(P, f.dom), interpret(P, f.cod)
    memo = _memo(f)
    key = ("fact", P)
    table = memo.get(key)
    if table is None:
        if isinstance(P, VarD):
            table = f.table
        else:
            table = np.array([b.index[fun_act_value(P, f, v)] for v in a.values], dtype=np.int64)
        memo[key] = table
    return FinMap(a.carrier, b.carrier, table)


def rel_map_witness(
    P: Desc, f: FinMap, g: FinMap, R0: Rel, R1: Rel
) -> tuple[Any, Any] | None:
    """Check that ``alpha : R0 x y -> R1 (f x) (g y)`` lifts along ``P``.

    Returns ``None`` on success or the first ``(s, t)`` whose images are
    unrelated. Raises if ``alpha`` itself fails.
    """
    if not is_positive(P):
        raise StructureError(f"{P} is not positive")
    if R0.dom != f.dom or R0.cod != g.dom or R1.dom != f.cod or R1.cod != g.cod:
        raise CarrierMismatch("maps and relations do not line up")
    alpha = R1.table[f.table][:, g.table]
    bad = R0.table & ~alpha
    if bad.any():
        x, y = np.argwhere(bad)[0]
        raise StructureError(
            f"precondition fails: {R0.dom.label(x)} ~ {R0.cod.label(y)} but images are unrelated"
        )
    T0 = rel_table(P, R0)
    T1 = rel_table(P, R1)
    Sf, Sg = fun_action(P, f).table, fun_action(P, g).table
    lifted = T1[Sf][:, Sg]
    bad = T0 & ~lifted
    if bad.any():
        i, k = np.argwhere(bad)[0]
        return interpret(P, R0.dom).values[i], interpret(P, R0.cod).values[k]
    return None


def function_equiv_str_plus(D: FunD, e: Bijection, f: FunTable, g: FunTable) -> bool:
    """``forall s. iota_T (f s) (g (action e s))``: the transport form for the domain."""
    dom = interpret(D.domain, e.dom)
    act = _action_table(D.domain, e)
    T = D.codomain
    for i in range(len(dom)):
        if not equiv_holds(T, e, decode(T, e.dom, f.data[i]), decode(T, e.cod, g.data[act[i]])):
            return False
    return True


def maybe_equiv_str_prime(D: MaybeD, e: Bijection, s: Any, t: Any) -> bool:
    """``map-Maybe (action e) s == t``."""
    if s is None:
        return t is None
    return t is not None and act_value(D.inner, e, s.value) == t.value


# -- description generation ------------------------------------------------


def generate_descs(max_depth: int, consts: tuple[Carrier, ...] = (), admissible_only: bool = True) -> list[Desc]:
    """All descriptions up to ``max_depth`` in a fixed order."""
    by_depth: list[list[Desc]] = [[], [X] + [ConstD(k) for k in consts]]
    for d in range(2, max_depth + 1):
        lower = [D for level in by_depth[1:d] for D in level]
        fresh: list[Desc] = []
        for a in lower:
            for b in lower:
                if max(depth(a), depth(b)) == d - 1:
                    fresh.append(ProdD(a, b))
        for a in lower:
            for b in lower:
                if max(depth(a), depth(b)) == d - 1:
                    if not admissible_only or is_positive(a):
                        fresh.append(FunD(a, b))
        for a in by_depth[d - 1]:
            fresh.append(MaybeD(a))
        if admissible_only:
            fresh = [D for D in fresh if is_admissible(D)]
        by_depth.append(fresh)
    return [D for level in by_depth[1:] for D in level]


def iter_values(D: Desc, X: Carrier) -> Iterator[Any]:
    return iter(interpret(D, X).values)

