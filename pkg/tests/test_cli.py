import json
import os
import subprocess
import sys

import pytest

from artifact.cli import EXIT_NOT_APPLICABLE, EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, main

from conftest import CORNER, CUBIC, CUBIC_PAIR, FREE_END, QUARTIC_PAIR


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    return code, json.loads(out)


def test_strong_rejection_exit_code(capsys):
    code, out, _ = run(capsys, "analyze", FREE_END, "--theorem", "4.2", "--lambda", "0.5", "--eta", "2", "--interval", "0", "1")
    assert code == EXIT_VIOLATED
    assert "Violated" in out and "= -24" in out
    assert "witness: t=" in out and "eta=[2]" in out and "lambda_bar=0.5" in out


def test_quartic_pair_interval_violation(capsys):
    code, doc = run_json(capsys, "analyze", QUARTIC_PAIR, "--theorem", "4.3", "--eta", "1", "1", "--interval", "0", "1")
    assert code == EXIT_VIOLATED
    (res,) = doc["results"]
    assert res["verdict"] == "Violated" and res["tested_value"] == pytest.approx(1.0, abs=1e-9)
    assert {"t", "eta"} <= set(res["witness"])


def test_not_applicable_lists_failed_hypothesis(capsys):
    code, out, _ = run(capsys, "analyze", CUBIC_PAIR, "--theorem", "3.1(ii)", "--lambda", "0.5", "--eta", "2", "1", "--theta", "0.5")
    assert code == EXIT_NOT_APPLICABLE
    assert "NotApplicable" in out
    failing = [l for l in out.splitlines() if l.rstrip().endswith(" no")]
    assert failing and "1" in failing[0]


def test_classical_checks(capsys):
    code, doc = run_json(capsys, "analyze", CUBIC, "--classical")
    assert code == EXIT_OK
    names = [r["theorem"] for r in doc["results"]]
    assert names == ["euler", "erdmann", "legendre"]
    assert doc["results"][0]["tested_value"] <= 1e-9
    assert doc["results"][1]["verdict"] == "NotApplicable"
    code, doc = run_json(capsys, "analyze", CORNER, "--classical")
    assert code == EXIT_OK and doc["results"][1]["verdict"] == "Satisfied"


def test_scan_and_oracle(capsys):
    code, doc = run_json(capsys, "scan", CUBIC_PAIR, "--interval", "0", "1", "--delta", "2", "--grid", "5", "--lambda-grid", "3")
    assert code == EXIT_OK
    hits = doc["results"][0]["hits"]
    assert any(h["eta"] == [1.0, 1.0] and h["lambda_bar"] == 0.5 for h in hits)
    code, out, _ = run(capsys, "oracle", CUBIC, "--prop", "2.2", "--theta", "0.5-", "--lambda", "0.5", "--xi", "1")
    assert code == EXIT_OK and "PASS" in out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["analyze", CUBIC],
        ["analyze", CUBIC, "--classical", "--theorem", "3.3"],
        ["analyze", CUBIC, "--theorem", "9.9", "--theta", "0.5", "--eta", "1"],
        ["analyze", FREE_END, "--theorem", "4.2", "--lambda", "0.5", "--eta", "2", "--theta", "0.5"],
        ["analyze", FREE_END, "--theorem", "4.2(ii)", "--mode", "strong", "--interval", "0", "1"],
        ["analyze", CUBIC, "--theorem", "3.3", "--theta", "0.5", "--eta", "1", "2"],
        ["analyze", CUBIC, "--classical", "--grid", "0"],
        ["analyze", "/nonexistent.toml", "--classical"],
        ["oracle", CUBIC, "--prop", "2.2", "--theta", "0.5", "--xi", "1"],
        ["oracle", CUBIC, "--prop", "2.2", "--theta", "0.5+", "--side", "-", "--lambda", "0.5", "--xi", "1"],
    ],
)
def test_usage_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_USAGE
    assert out == "" and err.startswith("varicheck: error:")


def test_bad_thread_count(capsys, monkeypatch):
    monkeypatch.setenv("VARICHECK_THREADS", "zero")
    code, _, err = run(capsys, "analyze", CUBIC, "--classical")
    assert code == EXIT_USAGE and "VARICHECK_THREADS" in err


def _cli(args, threads):
    env = dict(os.environ, VARICHECK_THREADS=str(threads))
    return subprocess.run([sys.executable, "-m", "artifact.cli", *map(str, args)], capture_output=True, env=env)


@pytest.mark.parametrize(
    "args",
    [
        ["analyze", CORNER, "--classical"],
        ["oracle", CUBIC, "--prop", "2.1", "--theta", "0.3", "--lambda", "0.5", "--xi", "1", "--side", "-"],
        ["analyze", QUARTIC_PAIR, "--theorem", "3.7(jj)", "--theta", "0.5", "--delta", "1.5", "--grid", "7", "--lambda-grid", "3"],
    ],
)
def test_json_is_byte_identical_across_runs_and_threads(args):
    outs = [_cli(args + ["--json"], n) for n in (1, 4, 1)]
    assert all(o.stderr == b"" for o in outs)
    assert outs[0].stdout == outs[1].stdout == outs[2].stdout
    doc = json.loads(outs[0].stdout)
    again = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    assert again.encode() == outs[0].stdout
    assert doc["schema_version"] == 1
