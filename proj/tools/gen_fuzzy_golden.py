#!/usr/bin/env python3
"""Regenerate tests/data/fuzzy_core_grid.csv from data/fuzzy_rules.json.

Straight-line evaluation of weighted min/max inference at every combination
of term cores, written without reference to the C++ engine. Review the diff
by hand whenever the rule base changes.
"""
import csv
import json
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
LEVELS = ["EmergencyStop", "Critical", "Warning", "Caution", "Safe", "Optimal"]


def tri(x, a, b, c):
    if x < a or x > c:
        return 0.0
    if x == b:
        return 1.0
    if x < b:
        return (x - a) / (b - a)
    return (c - x) / (c - b)


def memberships(var, x):
    f = math.log10 if var["axis"] == "log10" else (lambda v: v)
    lo, hi = f(var["terms"][0]["b"]), f(var["terms"][-1]["b"])
    u = min(max(f(x), lo), hi)
    return {t["name"]: tri(u, f(t["a"]), f(t["b"]), f(t["c"])) for t in var["terms"]}


def classify(doc, inputs):
    m = {v["name"]: memberships(v, inputs[v["name"]]) for v in doc["variables"]}
    act = [0.0] * 6
    for r in doc["rules"]:
        s = 1.0
        for var, term in r["if"]:
            s = min(s, m[var][term])
        s *= r["weight"]
        k = LEVELS.index(r["then"])
        act[k] = max(act[k], s)
    best = 0
    for i in range(6):
        if act[i] > act[best]:
            best = i
    scores = doc["level_scores"]
    total = sum(act)
    score = sum(a * scores[LEVELS[i]] for i, a in enumerate(act)) / total
    return LEVELS[best], act, score


def main():
    doc = json.loads((ROOT / "data" / "fuzzy_rules.json").read_text())
    out = ROOT / "tests" / "data" / "fuzzy_core_grid.csv"
    names = [v["name"] for v in doc["variables"]]
    rows = []
    for tm in doc["variables"][0]["terms"]:
        for tk in doc["variables"][1]["terms"]:
            for tv in doc["variables"][2]["terms"]:
                inputs = {names[0]: tm["b"], names[1]: tk["b"], names[2]: tv["b"]}
                level, act, score = classify(doc, inputs)
                rows.append([tm["name"], tk["name"], tv["name"], level,
                             f"{score:.12g}"] + [f"{a:.12g}" for a in act])
    with out.open("w", newline="") as fh:
        fh.write("# schema: singularguard.fuzzy_core_grid/1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["manipulability", "condition_quality", "velocity", "classification",
                    "safety_score"] + [f"a_{l}" for l in LEVELS])
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)


if __name__ == "__main__":
    main()
