"""Finite carriers, boolean relations, and quotients.

Everything here is immutable once built. Relations are dense boolean
tables; existential quantifiers over finite carriers stand in for
propositional truncation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, Sequence

import numpy as np


class FinRelError(Exception):
    """Base class for errors raised by the relation core."""


class CarrierMismatch(FinRelError):
    pass


class NotAnEquivalence(FinRelError):
    """Raised when a relation fails reflexivity, symmetry or transitivity."""

    def __init__(self, law: str, witness: tuple[int, ...], rel: "Rel"):
        labels = tuple(
            rel.dom.label(w) for w in witness
        )
        super().__init__(f"relation on {rel.dom.name} is not {law}: {labels}")
        self.law = law
        self.witness = witness
        self.labels = labels


class NotAQer(FinRelError):
    """Raised by :func:`check_qer`; ``kind`` is ``"zigzag"`` or ``"untotal"``."""

    def __init__(self, kind: str, witness: tuple[int, ...], side: str | None, rel: "Rel"):
        if kind == "zigzag":
            x, y, x2, y2 = witness
            labels = (rel.dom.label(x), rel.cod.label(y), rel.dom.label(x2), rel.cod.label(y2))
            msg = f"not zigzag-complete at {labels}"
        else:
            carrier = rel.dom if side == "left" else rel.cod
            labels = (carrier.label(witness[0]),)
            msg = f"not total on the {side}: {labels[0]} has no partner"
        super().__init__(msg)
        self.kind = kind
        self.witness = witness
        self.side = side
        self.labels = labels


class SoundnessError(FinRelError):
    """An internal verification failed; indicates a bug, not bad input."""


@dataclass(frozen=True, eq=False)
class Carrier:
    """A finite enumerated set.

    ``labels`` are the printable names, ``values`` optional payload objects
    (defaulting to the labels). Position in the tuples is the element index.
    """

    name: str
    labels: tuple[str, ...]
    values: tuple[Any, ...] | None = None

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            seen = set()
            dup = next(lab for lab in labels if lab in seen or seen.add(lab))
            raise FinRelError(f"carrier {self.name}: duplicate label {dup!r}")
        if self.values is None:
            object.__setattr__(self, "values", labels)
        else:
            values = tuple(self.values)
            if len(values) != len(labels):
                raise FinRelError(f"carrier {self.name}: {len(values)} values for {len(labels)} labels")
            object.__setattr__(self, "values", values)
        object.__setattr__(self, "_hash", hash((self.name, labels)))

    @classmethod
    def of(cls, name: str, values: Iterable[Any], label: Callable[[Any], str] = str) -> "Carrier":
        values = tuple(values)
        return cls(name, tuple(label(v) for v in values), values)

    @classmethod
    def range(cls, name: str, n: int) -> "Carrier":
        return cls(name, tuple(str(i) for i in range(n)), tuple(range(n)))

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Carrier):
            return NotImplemented
        return self._hash == other._hash and self.name == other.name and self.labels == other.labels

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Carrier({self.name!r}, size={len(self)})"

    @cached_property
    def _label_index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    @cached_property
    def _value_index(self) -> dict[Any, int]:
        return {v: i for i, v in enumerate(self.values)}

    def index(self, label: str) -> int:
        try:
            return self._label_index[label]
        except KeyError:
            raise FinRelError(f"{label!r} is not an element of {self.name}") from None

    def index_of_value(self, value: Any) -> int:
        try:
            return self._value_index[value]
        except KeyError:
            raise FinRelError(f"{value!r} is not a value of {self.name}") from None

    def label(self, i: int) -> str:
        return self.labels[i]

    def value(self, i: int) -> Any:
        return self.values[i]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Rel:
    """A prop-valued relation ``dom -> cod -> bool`` stored as a dense table."""

    dom: Carrier
    cod: Carrier
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=bool)
        if table.shape != (len(self.dom), len(self.cod)):
            raise FinRelError(
                f"table shape {table.shape} does not match {len(self.dom)}x{len(self.cod)}"
            )
        object.__setattr__(self, "table", _frozen(table))

    @classmethod
    def from_pairs(cls, dom: Carrier, cod: Carrier, pairs: Iterable[tuple[int, int]]) -> "Rel":
        table = np.zeros((len(dom), len(cod)), dtype=bool)
        for x, y in pairs:
            table[x, y] = True
        return cls(dom, cod, table)

    @classmethod
    def from_predicate(cls, dom: Carrier, cod: Carrier, pred: Callable[[int, int], bool]) -> "Rel":
        table = np.array(
            [[bool(pred(x, y)) for y in range(len(cod))] for x in range(len(dom))], dtype=bool
        ).reshape(len(dom), len(cod))
        return cls(dom, cod, table)

    def __call__(self, x: int, y: int) -> bool:
        return bool(self.table[x, y])

    def __eq__(self, other):
        if not isinstance(other, Rel):
            return NotImplemented
        return self.dom == other.dom and self.cod == other.cod and np.array_equal(self.table, other.table)

    __hash__ = None

    def __repr__(self):
        return f"Rel({self.dom.name} -> {self.cod.name}, {int(self.table.sum())} pairs)"

    def pairs(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.table)
        return list(zip(xs.tolist(), ys.tolist()))

    def is_subrel(self, other: "Rel") -> bool:
        return not np.any(self.table & ~other.table)

    @cached_property
    def zigzag_labels(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Class labels when the relation is zigzag-complete, else ``None``.

        A zigzag-complete relation is a disjoint union of complete bipartite
        blocks; ``R x y`` holds iff both get the same non-negative label.
        """
        return _block_labels(self.table)


def _block_labels(table: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    n, m = table.shape
    lab_dom = np.full(n, -1, dtype=np.int64)
    lab_cod = np.full(m, -1, dtype=np.int64)
    if n == 0 or m == 0:
        return lab_dom, lab_cod
    rows, first, inverse = np.unique(table, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    nonzero = rows.any(axis=1)
    # zigzag iff distinct nonempty rows are pairwise disjoint
    if np.any(rows[nonzero].sum(axis=0, dtype=np.int64) > 1):
        return None
    # number blocks by their least domain element
    order = [k for k in np.argsort(first, kind="stable") if nonzero[k]]
    relabel = np.full(len(rows), -1, dtype=np.int64)
    for new, k in enumerate(order):
        relabel[k] = new
        lab_cod[rows[k]] = new
    lab_dom[:] = relabel[inverse]
    return _frozen(lab_dom), _frozen(lab_cod)


@dataclass(frozen=True, eq=False)
class FinMap:
    """A total function between carriers given by an index table."""

    dom: Carrier
    cod: Carrier
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64).reshape(-1)
        if table.shape != (len(self.dom),):
            raise FinRelError(f"map table has {table.size} entries, domain has {len(self.dom)}")
        if table.size and (table.min() < 0 or table.max() >= len(self.cod)):
            raise FinRelError(f"map table points outside {self.cod.name}")
        object.__setattr__(self, "table", _frozen(table))

    @classmethod
    def from_function(cls, dom: Carrier, cod: Carrier, fn: Callable[[int], int]) -> "FinMap":
        return cls(dom, cod, np.array([fn(i) for i in range(len(dom))], dtype=np.int64))

    @classmethod
    def identity(cls, carrier: Carrier) -> "FinMap":
        return cls(carrier, carrier, np.arange(len(carrier)))

    def __call__(self, i: int) -> int:
        return int(self.table[i])

    def __eq__(self, other):
        if not isinstance(other, FinMap):
            return NotImplemented
        return self.dom == other.dom and self.cod == other.cod and np.array_equal(self.table, other.table)

    __hash__ = None

    def then(self, other: "FinMap") -> "FinMap":
        """Diagrammatic composite: first ``self``, then ``other``."""
        if self.cod != other.dom:
            raise CarrierMismatch(f"cannot compose {self.cod.name} with {other.dom.name}")
        return FinMap(self.dom, other.cod, other.table[self.table])

    def is_bijective(self) -> bool:
        return len(self.dom) == len(self.cod) and len(np.unique(self.table)) == len(self.cod)


@dataclass(frozen=True, eq=False)
class Bijection:
    forward: FinMap
    backward: FinMap

    def __post_init__(self):
        f, g = self.forward, self.backward
        if f.dom != g.cod or f.cod != g.dom:
            raise CarrierMismatch("bijection halves do not match up")
        if not np.array_equal(g.table[f.table], np.arange(len(f.dom))):
            raise FinRelError("backward is not a left inverse of forward")
        if not np.array_equal(f.table[g.table], np.arange(len(f.cod))):
            raise FinRelError("backward is not a right inverse of forward")

    @classmethod
    def from_map(cls, f: FinMap) -> "Bijection":
        if not f.is_bijective():
            raise FinRelError(f"map {f.dom.name} -> {f.cod.name} is not bijective")
        inv = np.empty(len(f.cod), dtype=np.int64)
        inv[f.table] = np.arange(len(f.dom))
        return cls(f, FinMap(f.cod, f.dom, inv))

    @classmethod
    def identity(cls, carrier: Carrier) -> "Bijection":
        ident = FinMap.identity(carrier)
        return cls(ident, ident)

    @property
    def dom(self) -> Carrier:
        return self.forward.dom

    @property
    def cod(self) -> Carrier:
        return self.forward.cod

    def __call__(self, i: int) -> int:
        return self.forward(i)

    def __eq__(self, other):
        if not isinstance(other, Bijection):
            return NotImplemented
        return self.forward == other.forward

    __hash__ = None

    def inverse(self) -> "Bijection":
        return Bijection(self.backward, self.forward)

    def then(self, other: "Bijection") -> "Bijection":
        return Bijection(self.forward.then(other.forward), other.backward.then(self.backward))


@dataclass(frozen=True, eq=False)
class Partition:
    """Classes of an equivalence relation, numbered by least member."""

    base: Carrier
    class_of: np.ndarray
    representatives: tuple[int, ...]

    def __post_init__(self):
        class_of = _frozen(np.asarray(self.class_of, dtype=np.int64))
        object.__setattr__(self, "class_of", class_of)
        reps = tuple(int(r) for r in self.representatives)
        object.__setattr__(self, "representatives", reps)
        r = np.array(reps, dtype=np.int64)
        if len(r) and not np.array_equal(class_of[r], np.arange(len(r))):
            raise FinRelError("a representative lies outside its class")
        least = np.full(len(r), len(class_of), dtype=np.int64)
        np.minimum.at(least, class_of, np.arange(len(class_of)))
        if not np.array_equal(least, r):
            raise FinRelError("a representative is not the least member of its class")

    def __len__(self) -> int:
        return len(self.representatives)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.class_of == c)


@dataclass(frozen=True)
class Quotient:
    carrier: Carrier
    map: FinMap
    partition: Partition

    def __iter__(self):
        # allows ``carrier, qmap, partition = quotient(...)``
        return iter((self.carrier, self.map, self.partition))


@dataclass(frozen=True, eq=False)
class QerWitness:
    rel: Rel
    choice_lr: FinMap
    choice_rl: FinMap
    per_left: Rel
    per_right: Rel

    @cached_property
    def left_quotient(self) -> Quotient:
        return quotient(self.rel.dom, self.per_left, name=f"{self.rel.dom.name}/R<")

    @cached_property
    def right_quotient(self) -> Quotient:
        return quotient(self.rel.cod, self.per_right, name=f"{self.rel.cod.name}/R>")


# -- relation algebra ------------------------------------------------------


def inverse_rel(R: Rel) -> Rel:
    return Rel(R.cod, R.dom, R.table.T)


def id_rel(X: Carrier) -> Rel:
    return Rel(X, X, np.eye(len(X), dtype=bool))


def total_rel(X: Carrier, Y: Carrier) -> Rel:
    return Rel(X, Y, np.ones((len(X), len(Y)), dtype=bool))


def graph_rel(f: FinMap) -> Rel:
    table = np.zeros((len(f.dom), len(f.cod)), dtype=bool)
    table[np.arange(len(f.dom)), f.table] = True
    return Rel(f.dom, f.cod, table)


def compose_rel(R: Rel, S: Rel) -> Rel:
    """``(R . S) x z`` iff some ``y`` has ``R x y`` and ``S y z``."""
    if R.cod != S.dom:
        raise CarrierMismatch(f"cannot compose relations through {R.cod.name} and {S.dom.name}")
    n, m = R.table.shape
    if n == 0 or m == 0 or len(S.cod) == 0:
        return Rel(R.dom, S.cod, np.zeros((n, len(S.cod)), dtype=bool))
    # identical rows compose identically; big quotient relations have few distinct rows
    rows, inverse = np.unique(R.table, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    prod = rows.astype(np.float32) @ S.table.astype(np.float32)
    return Rel(R.dom, S.cod, (prod > 0)[inverse])


# -- law checks ------------------------------------------------------------


def equivalence_violation(E: Rel) -> tuple[str, tuple[int, ...]] | None:
    """First failing law of an equivalence relation, with its least witness."""
    if E.dom != E.cod:
        raise CarrierMismatch("an equivalence relation must be homogeneous")
    t = E.table
    diag = np.diagonal(t)
    if not diag.all():
        return "reflexive", (int(np.argmin(diag)),)
    asym = t & ~t.T
    if asym.any():
        x, y = np.argwhere(asym)[0]
        return "symmetric", (int(x), int(y))
    if _block_labels(t) is not None:
        return None
    for x in range(len(t)):
        for y in np.flatnonzero(t[x]):
            bad = t[y] & ~t[x]
            if bad.any():
                return "transitive", (x, int(y), int(np.argmax(bad)))
    raise AssertionError("unreachable: symmetric reflexive relation with overlapping rows")


def is_equivalence(E: Rel) -> bool:
    return E.dom == E.cod and equivalence_violation(E) is None


def is_per(E: Rel) -> bool:
    """Symmetric and transitive."""
    t = E.table
    if E.dom != E.cod or np.any(t != t.T):
        return False
    # symmetric: transitivity is the same as zigzag-completeness
    return _block_labels(t) is not None


def zigzag_counterexample(R: Rel) -> tuple[int, int, int, int] | None:
    """The lexicographically least ``(x, y, x', y')`` breaking zigzag-completeness."""
    if R.zigzag_labels is not None:
        return None
    t = R.table
    for x in range(t.shape[0]):
        for y in np.flatnonzero(t[x]):
            for x2 in np.flatnonzero(t[:, y]):
                bad = t[x2] & ~t[x]
                if bad.any():
                    return x, int(y), int(x2), int(np.argmax(bad))
    raise AssertionError("unreachable: overlapping rows without a zigzag violation")


def is_zigzag_complete(R: Rel) -> bool:
    return R.zigzag_labels is not None


def _first_true(t: np.ndarray) -> np.ndarray:
    """Least column index of a true cell in each row (rows must be nonempty)."""
    if t.size == 0:
        return np.zeros(t.shape[0], dtype=np.int64)
    return np.argmax(t, axis=1)


def check_qer(R: Rel) -> QerWitness:
    """Validate a quasi-equivalence relation, raising :class:`NotAQer` otherwise.

    Zigzag-completeness is checked first, then totality on the left, then
    on the right. Choice maps pick the least-index partner.
    """
    cx = zigzag_counterexample(R)
    if cx is not None:
        raise NotAQer("zigzag", cx, None, R)
    t = R.table
    row_any = t.any(axis=1)
    if not row_any.all():
        raise NotAQer("untotal", (int(np.argmin(row_any)),), "left", R)
    col_any = t.any(axis=0)
    if not col_any.all():
        raise NotAQer("untotal", (int(np.argmin(col_any)),), "right", R)
    choice_lr = FinMap(R.dom, R.cod, _first_true(t))
    choice_rl = FinMap(R.cod, R.dom, _first_true(t.T))
    inv = inverse_rel(R)
    return QerWitness(R, choice_lr, choice_rl, compose_rel(R, inv), compose_rel(inv, R))


# -- quotients -------------------------------------------------------------


def quotient(X: Carrier, E: Rel, name: str | None = None) -> Quotient:
    """Set quotient of ``X`` by the equivalence relation ``E``.

    Classes are labelled ``[rep]`` by their least member and carry the
    representative's value as payload.
    """
    if E.dom != X or E.cod != X:
        raise CarrierMismatch(f"relation is not on {X.name}")
    bad = equivalence_violation(E)
    if bad is not None:
        raise NotAnEquivalence(bad[0], bad[1], E)
    lab, _ = E.zigzag_labels
    # block labels are already numbered by least member
    _, first = np.unique(lab, return_index=True)
    reps = tuple(int(r) for r in first)
    carrier = Carrier(
        name or f"{X.name}/~",
        tuple(f"[{X.label(r)}]" for r in reps),
        tuple(X.value(r) for r in reps),
    )
    partition = Partition(X, lab, reps)
    return Quotient(carrier, FinMap(X, carrier, lab), partition)


def induced_equiv(w: QerWitness) -> Bijection:
    """The bijection ``X/R< -> Y/R>`` sending ``[x]`` to ``[choice(x)]``.

    Well-definedness, both cancellation laws and the characterization
    ``e [x] = [y] <=> R x y`` are all verified before returning.
    """
    R = w.rel
    left, right = w.left_quotient, w.right_quotient
    qx, qy = left.map.table, right.map.table
    reps_x = np.array(left.partition.representatives, dtype=np.int64)
    reps_y = np.array(right.partition.representatives, dtype=np.int64)
    fwd = qy[w.choice_lr.table[reps_x]] if len(reps_x) else np.zeros(0, dtype=np.int64)
    bwd = qx[w.choice_rl.table[reps_y]] if len(reps_y) else np.zeros(0, dtype=np.int64)

    # every representative, not just the canonical one, must land in the same class
    if not np.array_equal(qy[w.choice_lr.table], fwd[qx]):
        raise SoundnessError("forward map is not constant on R<-classes")
    if not np.array_equal(qx[w.choice_rl.table], bwd[qy]):
        raise SoundnessError("backward map is not constant on R>-classes")
    forward = FinMap(left.carrier, right.carrier, fwd)
    backward = FinMap(right.carrier, left.carrier, bwd)
    try:
        e = Bijection(forward, backward)
    except FinRelError as exc:
        raise SoundnessError(f"induced maps do not cancel: {exc}") from exc
    char = fwd[qx][:, None] == qy[None, :]
    if not np.array_equal(char, R.table):
        x, y = np.argwhere(char != R.table)[0]
        raise SoundnessError(
            f"characterization fails at {R.dom.label(x)}, {R.cod.label(y)}"
        )
    return e


def relations(X: Carrier, Y: Carrier) -> Iterable[Rel]:
    """All ``2^(|X||Y|)`` relations, in binary-counting order."""
    n, m = len(X), len(Y)
    k = n * m
    for bits in range(2**k):
        flat = np.array([(bits >> i) & 1 for i in range(k)], dtype=bool)
        yield Rel(X, Y, flat.reshape(n, m))


def equivalences(X: Carrier) -> list[Rel]:
    """All equivalence relations on ``X`` (one per set partition)."""
    out = []
    for blocks in _set_partitions(list(range(len(X)))):
        lab = np.empty(len(X), dtype=np.int64)
        for c, block in enumerate(blocks):
            lab[block] = c
        out.append(Rel(X, X, lab[:, None] == lab[None, :]))
    return out


def _set_partitions(items: Sequence[int]) -> Iterable[list[list[int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
