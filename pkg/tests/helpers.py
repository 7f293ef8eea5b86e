"""Conversions between package values and the oracle encodings."""

from __future__ import annotations

import oracles
from repind.finrel import Carrier
from repind.structure import ConstD, FunD, MaybeD, ProdD, X, decode, parse_desc, size

K2 = Carrier.of("K", ["u", "v"])
CONSTS = {"K": K2}


def D(text):
    return parse_desc(text, CONSTS)


def to_oracle_desc(d):
    if d == X:
        return oracles.X
    if isinstance(d, ConstD):
        return oracles.K(len(d.carrier))
    if isinstance(d, ProdD):
        return oracles.Prod(to_oracle_desc(d.left), to_oracle_desc(d.right))
    if isinstance(d, FunD):
        return oracles.Fun(to_oracle_desc(d.domain), to_oracle_desc(d.codomain))
    return oracles.Maybe(to_oracle_desc(d.inner))


def to_oracle_value(d, C, v):
    if d == X or isinstance(d, ConstD):
        return v
    if isinstance(d, ProdD):
        return (to_oracle_value(d.left, C, v[0]), to_oracle_value(d.right, C, v[1]))
    if isinstance(d, MaybeD):
        return None if v is None else ("just", to_oracle_value(d.inner, C, v.value))
    n = size(d.domain, C)
    return tuple(to_oracle_value(d.codomain, C, decode(d.codomain, C, v.data[i])) for i in range(n))
