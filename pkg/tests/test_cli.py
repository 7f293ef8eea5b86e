from __future__ import annotations

import copy
import json
import subprocess
import sys

import pytest

import oracles
from repind.cli import main
from test_specfile import PARITY

LABELS = ["a", "b", "c", "d"]

# even elements of A relate to {a, c}, odd ones to {b, d}
BLOCKS = {
    "carriers": {"A": ["0", "1", "2", "3"], "B": LABELS},
    "constants": [],
    "desc": "fun(X,X)",
    "operations": ["succ"],
    "instances": {
        "left": {"carrier": "A", "value": ["1", "2", "3", "0"]},
        "right": {"carrier": "B", "value": ["b", "c", "d", "a"]},
    },
    "relation": {"pairs": [[str(x), y] for x in range(4) for y in LABELS if x % 2 == LABELS.index(y) % 2]},
}


def write(tmp_path, data, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_qer_check_passes(tmp_path, capsys):
    code, out, _ = run(capsys, "qer-check", write(tmp_path, BLOCKS))
    assert code == 0
    assert out.startswith("qer-check spec.json: PASS")


def test_zigzag_failure_names_the_quadruple(tmp_path, capsys):
    data = copy.deepcopy(BLOCKS)
    data["relation"]["pairs"].remove(["2", "c"])
    pairs = {(int(x), LABELS.index(y)) for x, y in data["relation"]["pairs"]}
    x, y, x2, y2 = oracles.zigzag_least(pairs, 4, 4)
    code, out, _ = run(capsys, "qer-check", write(tmp_path, data), "--json")
    assert code == 1
    rep = json.loads(out)
    zig = next(c for c in rep["checks"] if c["name"] == "relation is zigzag-complete")
    assert zig["verdict"] == "fail"
    assert zig["detail"] == [str(x), LABELS[y], str(x2), LABELS[y2]]


def test_pipeline_on_builtin_specs(capsys):
    for name in ("queues", "multisets", "monoid"):
        code, out, _ = run(capsys, "pipeline", f"builtin:{name}")
        assert code == 0, out


def test_pipeline_reports_unrelated_structures(tmp_path, capsys):
    data = copy.deepcopy(PARITY)
    data["instances"]["right"]["value"] = ["even", "odd"]
    code, out, _ = run(capsys, "pipeline", write(tmp_path, data))
    assert code == 1
    assert "[FAIL] structures are related" in out


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["qer-check", "missing.json"], "spec file not found"),
        (["case-study", "queues", "--param", "alphabet=two"], "expects an integer"),
        (["case-study", "queues", "--param", "colour=red"], "unknown parameter 'colour'"),
        (["case-study", "monoids", "--param", "width=9"], "width must be between 1 and 4"),
        (["suite", "positivity", "--desc", "fun(X,X)"], "not positive"),
        (["suite", "suitability", "--desc", "fun(fun(X,X),X)"], "not admissible"),
        (["suite", "suitability", "--desc", "const(K)"], "unknown constant carrier"),
    ],
)
def test_input_errors_exit_2(capsys, argv, fragment):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert fragment in err


def test_bad_spec_exit_2(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"carriers": }')
    code, _, err = run(capsys, "qer-check", str(p))
    assert code == 2
    assert "line 1 column 14" in err


def test_cap_exceeded_exit_3(tmp_path, capsys):
    n = 6
    labels = [str(i) for i in range(n)]
    row = lambda i: [labels[(i + j) % n] for j in range(n)]  # noqa: E731
    data = {
        "carriers": {"A": labels, "B": labels},
        "constants": [],
        "desc": "fun(X,fun(X,X))",
        "operations": ["add"],
        "instances": {"left": {"carrier": "A", "value": [row(i) for i in range(n)]},
                      "right": {"carrier": "B", "value": [row(i) for i in range(n)]}},
        "relation": {"graphOf": labels},
    }
    code, _, err = run(capsys, "pipeline", write(tmp_path, data), "--uniqueness", "full")
    assert code == 3
    assert "cap" in err
    code, _, _ = run(capsys, "pipeline", write(tmp_path, data))
    assert code == 0


def test_suite_commands(capsys):
    code, out, _ = run(capsys, "suite", "suitability", "--desc", "maybe(X)", "--samples", "20")
    assert code == 0
    assert "[ok  ] descent" in out
    code, out, _ = run(capsys, "suite", "positivity", "--desc", "prod(X,const(K))", "--const", "K=2",
                       "--samples", "20", "--json")
    assert code == 0
    assert json.loads(out)["verdict"] == "pass"


def test_case_study_with_params(capsys):
    code, out, _ = run(capsys, "case-study", "monoids", "--param", "width=1", "--json")
    assert code == 0
    assert json.loads(out)["params"] == {"width": 1}


def test_report_file_and_determinism(tmp_path, capsys):
    spec = write(tmp_path, PARITY)
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert run(capsys, "pipeline", spec, "--report", str(r1), "--json")[0] == 0
    assert run(capsys, "--json", "pipeline", spec, "--report", str(r2))[0] == 0
    assert r1.read_bytes() == r2.read_bytes()
    assert "timing" not in json.loads(r1.read_text())
    run(capsys, "pipeline", spec, "--report", str(r1), "--timing")
    assert "seconds" in json.loads(r1.read_text())["timing"]


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "repind.cli", "case-study", "cost"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("case-study cost: PASS")
