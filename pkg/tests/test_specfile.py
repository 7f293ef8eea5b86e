from __future__ import annotations

import copy
import json

import pytest

from repind.cli import shipped_spec
from repind.pipeline import qer_check, run_pipeline
from repind.specfile import SpecError, dumps_spec, load_spec, loads_spec, parse_spec, serialize
from repind.structure import FunTable, Just
from repind.studies import monoids, multisets, queues

PARITY = {
    "carriers": {"A": ["0", "1", "2", "3"], "P": ["even", "odd"]},
    "constants": [],
    "desc": "fun(X,X)",
    "operations": ["succ"],
    "instances": {
        "left": {"carrier": "A", "value": ["1", "2", "3", "0"]},
        "right": {"carrier": "P", "value": ["odd", "even"]},
    },
    "relation": {"graphOf": ["even", "odd", "even", "odd"]},
    "axioms": [{"name": "succ-twice", "formula": "(forall ((x X)) (= (succ (succ x)) x))"}],
}


def parity(**changes):
    data = copy.deepcopy(PARITY)
    for path, value in changes.items():
        node = data
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return data


def test_parity_spec_loads():
    spec = parse_spec(PARITY)
    assert str(spec.desc) == "fun(X,X)"
    assert spec.left.value == FunTable([1, 2, 3, 0])
    assert spec.relation.pairs() == [(0, 0), (1, 1), (2, 0), (3, 1)]
    assert spec.signature.ops == (("succ", ""),)


def test_round_trip():
    spec = parse_spec(PARITY)
    again = loads_spec(dumps_spec(spec))
    assert again == spec
    assert serialize(again) == serialize(spec)


@pytest.mark.parametrize("name, build", [
    ("queues", queues.build_spec),
    ("multisets", multisets.build_spec),
    ("monoid", monoids.build_spec),
])
def test_shipped_specs_match_their_builders(name, build):
    path = shipped_spec(name)
    assert path.read_text() == dumps_spec(build())
    assert load_spec(path) == build()


def test_function_table_must_be_total():
    with pytest.raises(SpecError) as info:
        parse_spec(parity(instances__left__value=["1", "2", "3"]))
    assert info.value.where == "instances.left.value"
    assert str(info.value).endswith("function table is not total: no image for domain value 3")


def test_unknown_label_names_its_position():
    with pytest.raises(SpecError) as info:
        parse_spec(parity(instances__left__value=["1", "2", "7", "0"]))
    assert info.value.where == "instances.left.value[2]"


def test_bad_json_reports_line_and_column():
    text = json.dumps(PARITY, indent=1).replace('"desc"', "desc", 1)
    with pytest.raises(SpecError) as info:
        loads_spec(text)
    line = next(i for i, ln in enumerate(text.splitlines(), 1) if "desc" in ln)
    assert info.value.where == f"line {line} column 2"


@pytest.mark.parametrize(
    "changes, where, fragment",
    [
        ({"instances__left__carrier": "Q"}, "instances.left.carrier", "unknown carrier"),
        ({"desc": "fun(X,Y)"}, "desc", "unexpected 'Y'"),
        ({"operations": []}, "operations", "non-empty"),
        ({"relation": {"graphOf": ["even", "odd"]}}, "relation.graphOf", "not total"),
        ({"relation": {}}, "relation", "exactly one"),
        ({"axioms": [{"name": "bad", "formula": "(forall ((x X)) (= (pred x) x))"}]}, "axioms[0].formula", "unknown operation"),
        ({"extra": 1}, "extra", "unknown field"),
    ],
)
def test_validation_messages(changes, where, fragment):
    with pytest.raises(SpecError) as info:
        parse_spec(parity(**changes))
    assert info.value.where == where
    assert fragment in str(info.value)


def test_nested_maybe_literals():
    data = {
        "carriers": {"A": ["a"], "B": ["b"]},
        "constants": [],
        "desc": "maybe(maybe(X))",
        "operations": ["m"],
        "instances": {"left": {"carrier": "A", "value": {"just": None}}, "right": {"carrier": "B", "value": None}},
        "relation": {"pairs": [["a", "b"]]},
    }
    spec = parse_spec(data)
    assert spec.left.value == Just(None) and spec.right.value is None
    assert loads_spec(dumps_spec(spec)) == spec
    data["instances"]["left"]["value"] = "a"
    with pytest.raises(SpecError, match="nested maybe"):
        parse_spec(data)


def test_parity_pipeline():
    spec = parse_spec(PARITY)
    rep = run_pipeline(spec, "parity")
    assert rep.ok
    raw = rep.sections["raw axioms"]
    assert raw["left"] == ["succ-twice: fails at x=0; 2 vs 0"]
    assert raw["right"] == ["succ-twice: holds (2 assignments)"]
    assert rep.sections["quotient sizes"] == {"left": 2, "right": 2}
    assert rep.sections["equivalence"] == {"[0]": "[even]", "[1]": "[odd]"}


def test_queue_spec_agrees_with_the_study():
    rep = run_pipeline(load_spec(shipped_spec("queues")), "queues")
    study = queues.run()
    assert rep.ok and study.ok
    st_ = queues.build_queue_study()
    assert rep.sections["quotient sizes"]["right"] == len(st_.lists.carrier)


def test_qer_check_reports_class_counts():
    rep = qer_check(parse_spec(PARITY), "parity")
    assert rep.ok
    assert rep.sections["classes"] == {"left": 2, "right": 2}
