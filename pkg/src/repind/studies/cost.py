"""A cost-counting monad whose counter is forgotten by a total quotient."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from ..finrel import Carrier, quotient, total_rel
from ..report import Report


@dataclass(frozen=True)
class CostValue:
    payload: int
    cost: int


def ret(x: int) -> CostValue:
    return CostValue(x, 0)


def bind(m: CostValue, g: Callable[[int], CostValue]) -> CostValue:
    r = g(m.payload)
    return CostValue(r.payload, m.cost + r.cost + 1)


@lru_cache(maxsize=None)
def fib(n: int) -> CostValue:
    if n < 2:
        return ret(n)
    return bind(fib(n - 1), lambda y: bind(fib(n - 2), lambda z: ret(y + z)))


def fib_aux(n: int, res: int, prev: int) -> CostValue:
    if n == 0:
        return ret(res)
    return bind(fib_aux(n - 1, res + prev, res), ret)


def fib_tail(n: int) -> CostValue:
    return ret(0) if n == 0 else fib_aux(n - 1, 1, 0)


def run(max_input: int = 20) -> Report:
    max_input = int(max_input)
    if not 0 <= max_input <= 25:
        raise ValueError("max_input must be between 0 and 25")
    rep = Report("case-study", "cost", {"max_input": max_input})
    rows = [(n, fib(n), fib_tail(n)) for n in range(max_input + 1)]
    rep.sections["raw"] = {
        str(n): {"fib": [a.payload, a.cost], "fibTail": [b.payload, b.cost]} for n, a, b in rows
    }
    if max_input >= 20:
        rep.check("fib 20 = (6765, 21890)", (fib(20).payload, fib(20).cost) == (6765, 21890))
        rep.check("fibTail 20 = (6765, 19)", (fib_tail(20).payload, fib_tail(20).cost) == (6765, 19))
        rep.check("raw costs differ at 20", fib(20).cost != fib_tail(20).cost)

    costs = sorted({v.cost for _, a, b in rows for v in (a, b)})
    C = Carrier("cost", tuple(str(c) for c in costs), tuple(costs))
    squash = quotient(C, total_rel(C, C)).map
    collapsed = all(
        a.payload == b.payload and squash(C.index_of_value(a.cost)) == squash(C.index_of_value(b.cost))
        for _, a, b in rows
    )
    rep.check(f"fib n = fibTail n once costs are squashed, n <= {max_input}", collapsed)
    return rep
