import json
import re
import subprocess
import sys
from fractions import Fraction as F
from pathlib import Path

import pytest

from decisive import io
from decisive.cli import EXIT_NOT_CONVERGED, EXIT_OK, EXIT_REFUSED, main, run
from decisive.core import SparseDistribution
from decisive.errors import InvalidModel, ParseError
from decisive.models import always_a_dma, two_sinks_chain
from decisive.sta.library import pacman_sta

MODELS = Path(__file__).resolve().parent.parent / "models"


def m(name):
    return str(MODELS / name)


def cli(*argv):
    code, text = run(list(argv))
    return code, (json.loads(text) if text.lstrip().startswith("{") else text)


# ---- formats ----------------------------------------------------------------

def test_parse_error_location(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "states": [0, 1],\n  "edges": [\n    {"from": 0 "to": 1}\n  ]\n}\n')
    with pytest.raises(ParseError) as info:
        io.chain_from_json(str(bad))
    msg = str(info.value)
    assert msg.startswith(f"{bad}:4:")
    assert "delimiter" in msg


def test_structural_errors_name_the_field():
    with pytest.raises(ParseError, match=r"edges\[0\]: missing key 'prob'"):
        io.chain_from_json({"states": [0], "edges": [{"from": 0, "to": 0}]})
    with pytest.raises(ParseError, match=r"edges\[0\].prob"):
        io.chain_from_json({"states": [0], "edges": [{"from": 0, "to": 0, "prob": "half"}]})
    with pytest.raises(ParseError, match="unknown chain family"):
        io.chain_from_json({"family": "nope"})
    with pytest.raises(ParseError, match="cannot read file"):
        io.chain_from_json("/nonexistent/chain.json")


def test_distribution_syntax():
    assert dict(io.parse_distribution("1:1/2,2:1/2")) == {1: F(1, 2), 2: F(1, 2)}
    assert dict(io.parse_distribution("s0")) == {"s0": 1}
    with pytest.raises(InvalidModel):
        io.parse_distribution("1:1/2")


def test_chain_round_trip():
    c = two_sinks_chain()
    loaded = io.chain_from_json(json.dumps(io.chain_to_json(c, SparseDistribution.dirac("c"))))
    assert loaded.chain.states == c.states
    for s in c.states:
        assert dict(loaded.chain.successors(s)) == dict(c.successors(s))
        assert loaded.chain.label(s) == c.label(s)
    assert dict(loaded.init) == {"c": 1}


def test_automaton_round_trip():
    dma = always_a_dma()
    back = io.dma_from_json(json.dumps(io.dma_to_json(dma)))
    assert back.muller == dma.muller and set(back.edges()) == set(dma.edges())
    assert io.dma_from_json(m("always-a.json")).step("q0", set()) == "_sink"


def test_sta_round_trip():
    sta = pacman_sta()
    back = io.sta_from_json(json.dumps(io.sta_to_json(sta)))
    assert back.edges == sta.edges and back.initial == sta.initial
    assert back.dists == sta.dists and back.labels == sta.labels


def test_builtin_families_take_overrides():
    loaded = io.chain_from_json(m("walk.json"), p="2/3")
    assert loaded.params["p"] == F(2, 3)
    assert dict(loaded.init) == {1: 1}


def test_handle_files():
    h, loaded = io.handle_from_json(m("walk-tf.json"))
    assert h.alpha(7) == "s2" and loaded.family == "random-walk"
    h2, none = io.handle_from_json(m("pacman-tg.json"))
    assert none is None and len(list(h2.abstract.states)) == 6


# ---- commands -----------------------------------------------------------------

def test_approx_reach_recurrent_walk():
    code, out = cli("approx-reach", "--model", m("walk.json"), "--p", "1/3", "--init", "1:1",
                    "--target", "0", "--eps", "1e-3")
    assert code == EXIT_OK
    lo, hi = out["interval"]
    assert lo >= 0.999 and hi == 1


def test_approx_reach_transient_walk_exits_3():
    code, out = cli("approx-reach", "--model", m("walk.json"), "--p", "2/3", "--init", "1:1",
                    "--target", "0", "--eps", "1e-3", "--budget", "10000")
    assert code == EXIT_NOT_CONVERGED
    assert abs(out["residual"] - 0.5) < 2e-3
    assert out["tainted"] is True


def test_exact_rationals_in_reports():
    code, out = cli("approx-until", "--model", m("gambler.json"), "--init", "1", "--until", "1,2",
                    "--target", "3", "--exact", "--eps", "1e-9")
    assert code == EXIT_OK
    lo, hi = (F(x) for x in out["interval"])
    assert lo <= F(1, 7) <= hi and hi - lo <= F(1, 10**9)


def test_qualitative_and_graph_commands():
    code, out = cli("check-qualitative", "--model", m("two-sinks.json"), "--target", "a")
    assert code == EXIT_OK and out["verdict"] == "Positive"
    code, dot = run(["attractor-graph", "--model", m("tf.json"), "--dma", m("always-a.json"),
                     "--init", "s0", "--out", "dot"])
    assert code == EXIT_OK and _valid_dot(dot)
    code, dot = run(["product", "--model", m("tf.json"), "--dma", m("always-a.json"), "--init", "s0",
                     "--out", "dot"])
    assert _valid_dot(dot)


def test_thick_graph_dot():
    code, dot = run(["sta-thick-graph", "--model", m("pacman.json"), "--out", "dot"])
    assert code == EXIT_OK and _valid_dot(dot)
    assert len(re.findall(r"^\s*n\d+ \[", dot, re.M)) == 6


def test_refusal_exit_code(capsys):
    assert main(["sta-check", "--model", m("pacman.json"), "--dma", m("gf-goal.json")]) == EXIT_REFUSED
    err = capsys.readouterr().err
    assert "thick graph unsound: STA class General" in err


def test_check_abstraction_reports_failure():
    code, out = cli("check-abstraction", "--handle", m("walk-tf.json"), "--bound", "8")
    assert code == EXIT_REFUSED
    assert out["is_abstraction"] is False
    assert out["check"]["offending"][0][2] == "abstract edge without concrete counterpart"


def test_dot_rejected_for_reports(capsys):
    assert main(["approx-reach", "--model", m("tf.json"), "--init", "s1", "--target", "s0",
                 "--out", "dot"]) == EXIT_REFUSED


def test_parse_error_through_cli(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  oops\n}")
    assert main(["approx-reach", "--model", str(bad), "--target", "0"]) == EXIT_REFUSED
    assert f"{bad}:2:3:" in capsys.readouterr().err


def test_text_output_and_file(tmp_path):
    code, text = run(["approx-reach", "--model", m("tf.json"), "--init", "s1", "--target", "s0",
                      "--out", "text"])
    assert "interval:" in text
    target = tmp_path / "r.json"
    code, text = run(["approx-reach", "--model", m("tf.json"), "--init", "s1", "--target", "s0",
                      "-o", str(target)])
    assert text == "" and json.loads(target.read_text())["command"] == "approx-reach"


def test_every_json_report_reparses():
    cases = [
        ["product", "--model", m("tf.json"), "--dma", m("always-a.json"), "--init", "s0"],
        ["avoid-set", "--model", m("two-sinks.json"), "--target", "a"],
        ["attractor-graph", "--model", m("tf.json"), "--dma", m("always-a.json"), "--init", "s0"],
        ["approx-repeated", "--model", m("two-sinks.json"), "--init", "c", "--target", "a"],
        ["approx-omega", "--model", m("tf.json"), "--dma", m("always-a.json"), "--init", "s0"],
        ["sta-thick-graph", "--model", m("reactive-cycle.json")],
        ["sta-check", "--model", m("reactive-cycle.json"), "--dma", m("gf-a.json")],
        ["sta-approx", "--model", m("one-clock-race.json"), "--dma", m("gf-a.json"),
         "--samples", "2000", "--eps", "0.2"],
        ["sta-time-bounded", "--model", m("exp-loop.json"), "--min-jumps", "1",
         "--interval", "[0,1]", "--samples", "2000", "--eps", "0.2"],
    ]
    for argv in cases:
        code, text = run(argv)
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED), argv
        assert json.loads(text)["command"] == argv[0]


def test_reports_are_byte_identical_across_processes():
    argv = ["sta-time-bounded", "--model", m("exp-loop.json"), "--min-jumps", "1",
            "--interval", "[0,1]", "--samples", "5000", "--eps", "0.1", "--seed", "12"]
    outs = [subprocess.run([sys.executable, "-m", "decisive.cli", *argv], capture_output=True,
                           env={"PYTHONHASHSEED": str(h), "PATH": ""}, check=False).stdout
            for h in (1, 2)]
    assert outs[0] == outs[1] and outs[0]


def test_seed_from_environment(monkeypatch):
    argv = ["sta-approx", "--model", m("one-clock-race.json"), "--dma", m("gf-a.json"),
            "--samples", "2000", "--eps", "0.2"]
    monkeypatch.setenv("DECISIVE_SEED", "5")
    a = run(argv)[1]
    b = run(argv + ["--seed", "5"])[1]
    c = run(argv + ["--seed", "6"])[1]
    assert a == b != c


def _valid_dot(text):
    lines = text.strip().splitlines()
    if not lines or not re.match(r"^digraph \w+ \{$", lines[0]) or lines[-1] != "}":
        return False
    node = re.compile(r'^\s*\w+ \[.*\];$')
    edge = re.compile(r'^\s*\w+ -> \w+( \[.*\])?;$')
    attr = re.compile(r"^\s*\w+=\w+;$")
    if text.count("{") != text.count("}"):
        return False
    return all(node.match(l) or edge.match(l) or attr.match(l) for l in lines[1:-1])
