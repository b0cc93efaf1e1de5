"""Regenerate the JSON files under models/ from the built-in constructors."""

import argparse
import json
from pathlib import Path

from decisive import io
from decisive.sta.library import STA_LIBRARY

FAMILIES = {
    "walk": {"family": "random-walk", "p": "1/3", "init": "1:1"},
    "tf": {"family": "Tf", "q": "1/2"},
    "two-sinks": {"family": "two-sinks", "init": "c:1"},
    "unfair": {"family": "unfair", "init": "b:1"},
}

HANDLES = {
    "walk-tf": {"concrete": "walk.json", "abstract": "tf.json", "map": "walk-to-Tf"},
    "pacman-tg": {"concrete": "pacman.json", "map": "sta-thick-graph"},
}

STAS = ["pacman", "exp-loop", "reactive-cycle", "one-clock-race"]


def gambler():
    """Gambler's ruin on 0..3, winning each bet with probability 1/3."""
    edges = [("0", "0", "1"), ("1", "0", "2/3"), ("1", "2", "1/3"), ("2", "1", "2/3"),
             ("2", "3", "1/3"), ("3", "3", "1")]
    return {"name": "gambler", "states": ["0", "1", "2", "3"], "init": {"1": "1"},
            "edges": [{"from": a, "to": b, "prob": p} for a, b, p in edges],
            "labels": {"3": ["win"]}, "ap": ["win"]}


def always_a():
    edges = [("q0", "q1"), ("q1", "q2"), ("q2", "q1")]
    return {"locations": ["q0", "q1", "q2"], "initial": "q0", "ap": ["a"],
            "edges": [{"from": a, "label": ["a"], "to": b} for a, b in edges],
            "muller": [["q1", "q2"]], "complete": True}


def infinitely_often(prop):
    """Two locations remembering whether ``prop`` held at the last step; accept when it recurs."""
    edges = [("seen", [], "unseen"), ("seen", [prop], "seen"),
             ("unseen", [], "unseen"), ("unseen", [prop], "seen")]
    return {"locations": ["seen", "unseen"], "initial": "unseen", "ap": [prop],
            "edges": [{"from": a, "label": u, "to": b} for a, u, b in edges],
            "muller": [["seen"], ["seen", "unseen"]]}


def models():
    out = dict(FAMILIES)
    out.update(HANDLES)
    out["gambler"] = gambler()
    out["always-a"] = always_a()
    for prop in ("a", "goal", "win"):
        out[f"gf-{prop}"] = infinitely_often(prop)
    for name in STAS:
        out[name] = io.sta_to_json(STA_LIBRARY[name]())
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "models"))
    args = ap.parse_args()
    target = Path(args.out)
    target.mkdir(parents=True, exist_ok=True)
    for name, obj in sorted(models().items()):
        (target / f"{name}.json").write_text(json.dumps(obj, indent=2) + "\n")
        print(target / f"{name}.json")


if __name__ == "__main__":
    main()
