"""Command-line surface: exit codes, outputs, files, determinism."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from xosnash import Instance, emit_instance, parse_report
from xosnash.cli import main


@pytest.fixture
def two_agent_file(tmp_path):
    inst = Instance.from_weight_matrices([[[2.0, 1.0]], [[1.0, 2.0]]])
    path = tmp_path / "inst.json"
    path.write_text(emit_instance(inst))
    return path


def _bigger_instance_text() -> str:
    inst = Instance.from_weight_matrices(
        [[[0.6, 0.2, 0.9, 0.4, 0.5, 0.1]], [[0.3, 0.8, 0.2, 0.7, 0.4, 0.6]]]
    )
    return emit_instance(inst)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_stdout_report(two_agent_file, capsys):
    assert main(["solve", "--instance", str(two_agent_file), "--seed", "3"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    rep = parse_report(lines[0])
    assert rep["seed"] == 3
    assert any(line.startswith("digest: ") and len(line) == len("digest: ") + 64
               for line in lines)
    assert any(line.startswith("nsw: ") for line in lines)


def test_solve_writes_report_and_figure(two_agent_file, tmp_path, capsys):
    out = tmp_path / "run.json"
    assert main(["solve", "--instance", str(two_agent_file), "--seed", "1",
                 "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert f"report: {out}" in printed
    fig = tmp_path / "run.png"
    assert f"figure: {fig}" in printed
    assert out.exists() and fig.exists()
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    again = tmp_path / "run2.json"
    assert main(["solve", "--instance", str(two_agent_file), "--seed", "1",
                 "--out", str(again)]) == 0
    capsys.readouterr()
    assert again.read_bytes() == out.read_bytes()


def test_solve_topup_flag(two_agent_file, capsys):
    assert main(["solve", "--instance", str(two_agent_file), "--seed", "2",
                 "--topup"]) == 0
    rep = parse_report(capsys.readouterr().out.splitlines()[0])
    assert sorted(g for b in rep["allocation"] for g in b) == [0, 1]


def test_solve_missing_file(tmp_path, capsys):
    assert main(["solve", "--instance", str(tmp_path / "nope.json")]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_solve_rejects_malformed_instance(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format":"xosnash-instance","version":1,"n":1,"m":1,"valuations":[[["x"]]]}')
    assert main(["solve", "--instance", str(bad)]) == 2
    assert "valuations[0][0][0]" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------

def test_exact_nsw(two_agent_file, capsys):
    assert main(["exact", "--instance", str(two_agent_file)]) == 0
    out = capsys.readouterr().out
    assert "optimal nsw: 2" in out
    assert "agent 0: [0]" in out and "agent 1: [1]" in out


def test_exact_capped(two_agent_file, capsys):
    assert main(["exact", "--instance", str(two_agent_file),
                 "--capped", "--betas", "0.1,0.1"]) == 0
    assert "capped welfare: " in capsys.readouterr().out
    assert main(["exact", "--instance", str(two_agent_file), "--capped"]) == 2
    assert "--betas" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--suite", "matchhigh", "--n", "2", "--trials", "3"],
        ["verify", "--suite", "movingknife", "--n", "2", "--trials", "5"],
        ["verify", "--suite", "cappedwelfare", "--n", "4"],
        ["verify", "--suite", "rematch", "--n", "2", "--trials", "10"],
        ["verify", "--suite", "concentration", "--n", "64", "--trials", "500"],
    ],
    ids=["matchhigh", "movingknife", "cappedwelfare", "rematch", "concentration"],
)
def test_verify_suites_pass(argv, capsys):
    assert main(argv) == 0
    assert capsys.readouterr().out.startswith(f"PASS {argv[2]}")


def test_verify_unknown_suite_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--suite", "nonsense"])
    assert exc.value.code == 2


# ---------------------------------------------------------------------------
# gadget
# ---------------------------------------------------------------------------

def test_gadget_gap_table(tmp_path, capsys):
    out = tmp_path / "gap.csv"
    assert main(["gadget", "--n", "2", "--m", "4", "--r", "2", "--seed", "0",
                 "--gap", "--trials", "2", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "equicovering n=2 m=4 r=2: verified" in printed
    assert f"table: {out}" in printed
    assert (tmp_path / "gap.png").exists()
    assert "gap 0.75" in printed
    rows = out.read_text().splitlines()
    assert rows[0] == "n,m,r,eps,case,nsw,gap"
    assert len(rows) == 5
    assert [r.split(",")[4] for r in rows[1:]] == ["intersecting", "disjoint"] * 2


def test_gadget_rejection_exits_one(capsys):
    assert main(["gadget", "--n", "2", "--m", "4", "--r", "2",
                 "--eps", "-0.5", "--seed", "0"]) == 1
    assert "REJECTED" in capsys.readouterr().out


def test_gadget_sampled_verification(capsys):
    assert main(["gadget", "--n", "2", "--m", "4", "--r", "2", "--seed", "0",
                 "--verify", "sampled=50"]) == 0
    assert "50 tuples" in capsys.readouterr().out


def test_gadget_bad_verify_mode(capsys):
    assert main(["gadget", "--n", "2", "--m", "4", "--r", "2",
                 "--verify", "bogus"]) == 2
    assert "exhaustive or sampled" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def test_bench_runs_and_skips_junk(tmp_path, capsys):
    (tmp_path / "a.json").write_text(_bigger_instance_text())
    (tmp_path / "b.json").write_text(
        emit_instance(Instance.from_weight_matrices([[[1.0, 2.0, 3.0]]]))
    )
    (tmp_path / "junk.json").write_text("{broken")
    out = tmp_path / "bench.csv"
    assert main(["bench", "--dir", str(tmp_path), "--seeds", "2",
                 "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert "skipping junk.json" in captured.err
    assert f"table: {out}" in captured.out
    assert (tmp_path / "bench.png").exists()
    rows = out.read_text().splitlines()
    assert rows[0] == "instance,seed,nsw,opt,ratio"
    assert len(rows) == 5  # 2 instances x 2 seeds
    for row in rows[1:]:
        cells = row.split(",")
        assert cells[0] in ("a", "b")
        assert float(cells[4]) <= 1.0 + 1e-9  # never beats the optimum


def test_bench_empty_and_unparsable_dirs(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["bench", "--dir", str(empty)]) == 2
    assert "no .json instances" in capsys.readouterr().err
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "x.json").write_text("[]")
    assert main(["bench", "--dir", str(bad)]) == 2
    assert "no parsable instances" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# top-level parser
# ---------------------------------------------------------------------------

def test_no_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_help_via_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "xosnash.cli", "--help"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("usage: xosnash")
    for cmd in ("solve", "exact", "verify", "gadget", "bench"):
        assert cmd in proc.stdout
