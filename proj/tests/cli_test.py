"""End-to-end checks of the qgamma command line tool."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

BIN, SCHEMA = sys.argv[1], sys.argv[2]
schema = json.loads(pathlib.Path(SCHEMA).read_text())
failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(args, cwd, config=None):
    if config is not None:
        path = pathlib.Path(cwd) / "config.json"
        path.write_text(json.dumps(config))
        args = ["--config", str(path)] + args
    return subprocess.run([BIN] + args, cwd=cwd, capture_output=True, text=True, timeout=900)


def summary(out):
    s = json.loads((pathlib.Path(out) / "summary.json").read_text())
    jsonschema.validate(s, schema)
    return s


with tempfile.TemporaryDirectory() as tmp:
    line = {"params": {"n": 1, "gamma": 0.25}}

    r = run(["check-k", "-o", "two"], tmp, dict(line, K="two_bump"))
    s = summary(pathlib.Path(tmp) / "two")
    check(r.returncode == 0 and s["verdict"] == "applicable", "check-k two_bump exits 0 and is applicable")
    check(s["result"]["omega_box"]["degree"] != 0, "check-k two_bump certifies a box with nonzero degree")
    check((pathlib.Path(tmp) / "two" / "critical_points.csv").exists(), "check-k writes the critical point table")

    r = run(["check-k", "-o", "one"], tmp, dict(line, K="gaussian"))
    s = summary(pathlib.Path(tmp) / "one")
    check(r.returncode == 2 and s["verdict"] == "not-applicable", "check-k single bump exits 2")
    check("(K5)" in s["result"]["reason"] and "sum" in s["result"]["k5"]["note"], "failing sum is reported")

    r = run(["check-k", "-o", "again"], tmp, dict(line, K="two_bump"))
    a = (pathlib.Path(tmp) / "two" / "summary.json").read_bytes()
    b = (pathlib.Path(tmp) / "again" / "summary.json").read_bytes()
    check(a == b, "same config and seed give byte-identical summary.json")

    r = run(["verify-bubble", "--n", "3", "--gamma", "0.5", "-o", "vb"], tmp)
    s = summary(pathlib.Path(tmp) / "vb")
    resid = [l for l in r.stdout.splitlines() if l.startswith("residual ")]
    check(r.returncode == 0 and resid and float(resid[0].split()[1]) <= 1e-6, "verify-bubble n=3 residual line")

    cfg = dict(line, K={"name": "pair", "eta": 1.5, "terms": [
        {"kind": "gaussian", "center": [1.0], "width": 0.75},
        {"kind": "gaussian", "center": [-1.0], "width": 0.75}]})
    r = run(["solve", "-o", "solve"], tmp, cfg)
    s = summary(pathlib.Path(tmp) / "solve")
    sol = s["result"].get("solution", {})
    check(r.returncode == 0 and sol.get("positivity_margin", 0) > 0, "solve on a term-sum K converges")
    check(s["result"].get("riesz", {}).get("residual", 1) <= 5e-4, "solve reports a small Riesz residual")

    r = run(["sweep", "-o", "sw"], tmp, dict(line, K="two_bump"))
    s = summary(pathlib.Path(tmp) / "sw")
    check(r.returncode == 0 and 0.85 <= s["result"]["slope"] <= 1.15, "sweep slope is near one")

    r = run(["report", "--input", "sw", "-o", "rep"], tmp, dict(line))
    rows = (pathlib.Path(tmp) / "rep" / "report.csv").read_text().splitlines()
    check(r.returncode == 0 and len(rows) == 1 + 4 + 1 and rows[-1].startswith("fit,"),
          "report merges four rows plus a fit row")
    first = (pathlib.Path(tmp) / "rep" / "report.csv").read_bytes()
    run(["report", "--input", "sw", "-o", "rep"], tmp, dict(line))
    check(first == (pathlib.Path(tmp) / "rep" / "report.csv").read_bytes(), "report is byte-identical on rerun")

    empty = pathlib.Path(tmp) / "empty"
    empty.mkdir()
    (empty / "sweep.csv").write_text("epsilon,distance_to_Z,residual_L2,newton_iters,mu,xi1,error\n")
    r = run(["report", "--input", "empty", "-o", "rep2"], tmp, dict(line))
    s = summary(pathlib.Path(tmp) / "rep2")
    rows = (pathlib.Path(tmp) / "rep2" / "report.csv").read_text().splitlines()
    check(len(rows) == 1 and s["warnings"], "empty sweep gives no fit row and a warning")

    r = run(["report", "--input", "missing", "-o", "rep3"], tmp, dict(line))
    check(r.returncode == 1 and "missing/sweep.csv" in (pathlib.Path(tmp) / "rep3" / "report.txt").read_text(),
          "report lists absent files")

    r = run([], tmp, dict(line, command="check-k", K="two_bump", options={"bogus": 1}))
    check(r.returncode == 1 and "options.bogus" in r.stderr, "unknown option key is named")
    r = run([], tmp, dict(line, command="solve", K="two_bump", options={"epsilon": 0.5}))
    check(r.returncode == 1 and "options.epsilon" in r.stderr, "out-of-range epsilon is named")
    r = run([], tmp, {"command": "check-k", "params": {"n": 1, "gamma": 0.7}, "K": "two_bump"})
    check(r.returncode == 1 and "params" in r.stderr, "invalid gamma is rejected")
    r = run([], tmp, dict(line, command="check-k", K={"expression": "exp(-x^2", "eta": 1}))
    check(r.returncode == 1 and "K.expression" in r.stderr, "expression syntax error names the key")

    r = run(["check-k", "-o", "expr"], tmp, dict(line, K={"expression": "exp(-(x-1)^2/0.5625) + exp(-(x+1)^2/0.5625)",
                                                       "eta": 1.5, "tail_value": 0}))
    s = summary(pathlib.Path(tmp) / "expr")
    check(any("finite differences" in w for w in s["warnings"]), "free expression carries the WARN banner")
    check(s["verdict"] == "applicable", "free-expression two-bump is applicable")

sys.exit(1 if failures else 0)
