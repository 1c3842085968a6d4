import json
from pathlib import Path


from kepal.cli import main

SPECS = Path(__file__).resolve().parent.parent / "specs"


def _spec(name):
    return str(SPECS / name)


def _fields(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


def _without_elapsed(text):
    return "\n".join(line for line in text.splitlines() if not line.startswith("elapsed="))


def test_validate_ok(capsys):
    assert main(["validate", _spec("forward.kpa")]) == 0
    out = _fields(capsys.readouterr().out)
    assert out["valid"] == "true" and out["agents"] == "3" and out["props"] == "2"
    assert len(out["digest"]) == 64


def test_validate_reports_errors(tmp_path, capsys):
    bad = tmp_path / "bad.kpa"
    bad.write_text("props: p, q. const C := a!(x, p & q).0. pool: agent 0 : C observes all. init: {}.")
    assert main(["validate", str(bad)]) == 1
    assert "unbound variable x" in capsys.readouterr().err


def test_world_cap_message(tmp_path, capsys):
    big = tmp_path / "big.kpa"
    big.write_text("props: p[1..25]. const C := 0. pool: agent 0 : C observes all. init: {}.")
    assert main(["validate", str(big)]) == 1
    assert "KEPAL_WORLD_CAP" in capsys.readouterr().err


def test_missing_file_and_usage(capsys):
    assert main(["validate", "/nonexistent.kpa"]) == 1
    assert main(["frobnicate"]) == 1


def test_explore_dump_is_deterministic(capsys):
    args = ["explore", _spec("forward.kpa"), "--out", "-"]
    assert main(args) == 0
    first = _without_elapsed(capsys.readouterr().out)
    assert main(args) == 0
    assert _without_elapsed(capsys.readouterr().out) == first
    assert first.startswith("KLTS states=5 transitions=5 root=0")


def test_explore_writes_file(tmp_path, capsys):
    out = tmp_path / "g.txt"
    assert main(["explore", _spec("minimal.kpa"), "--out", str(out), "--relations", "table"]) == 0
    assert _fields(capsys.readouterr().out)["dump"] == str(out)
    assert out.read_text().splitlines()[1].startswith("RELATION r0")


def test_explore_truncation_warns(capsys):
    assert main(["explore", _spec("forward.kpa"), "--max-states", "2"]) == 0
    captured = capsys.readouterr()
    assert _fields(captured.out)["truncated"] == "true"
    assert "partial" in captured.err


def test_check_true_with_lasso(capsys):
    assert main(["check", _spec("loop.kpa"), "G true"]) == 0
    out = _fields(capsys.readouterr().out)
    assert out["verdict"] == "true" and out["witness"] == "lasso" and out["replayed"] == "true"
    assert out["cycle"] == "0 -0.b->"


def test_check_false(capsys):
    assert main(["check", _spec("minimal.kpa"), "G true"]) == 2
    out = _fields(capsys.readouterr().out)
    assert out["verdict"] == "false" and out["witness"] == "summary"


def test_check_record_format(capsys):
    assert main(["check", _spec("minimal.kpa"), "F K[0] p", "--format", "record"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["verdict"] is True
    assert rec["witness"]["kind"] == "path"
    assert rec["witness"]["trace"] == [[0, "tau"], [1, None]]


def test_check_truncated_exit(capsys):
    assert main(["check", _spec("forward.kpa"), "F p", "--max-depth", "1"]) == 3


def test_check_bad_formula(capsys):
    assert main(["check", _spec("minimal.kpa"), "K[0] r"]) == 1
    assert "unknown proposition or formula r" in capsys.readouterr().err


def test_bisim_two_specs(capsys):
    assert main(["bisim", _spec("loop.kpa"), _spec("loop_renamed.kpa")]) == 0
    assert _fields(capsys.readouterr().out)["bisimilar"] == "true"
    assert main(["bisim", _spec("loop.kpa"), _spec("loop_blind.kpa")]) == 2
    assert _fields(capsys.readouterr().out)["condition"] == "3"


def test_bisim_states(capsys):
    assert main(["bisim", _spec("minimal.kpa"), "--states", "0", "1"]) == 2
    assert _fields(capsys.readouterr().out)["condition"] == "1"
    assert main(["bisim", _spec("minimal.kpa")]) == 1


def test_cluedo_gen(tmp_path, capsys):
    out = tmp_path / "c.kpa"
    assert main(["cluedo-gen", "8", "3", "2", "2", "--out", str(out)]) == 0
    rep = _fields(capsys.readouterr().out)
    assert rep["deal_branches"] == "2520" == rep["closed_form"]
    assert out.read_text() == (SPECS / "cluedo_8_3_2_2.kpa").read_text()


def test_cluedo_gen_stdout(capsys):
    assert main(["cluedo-gen", "4", "2", "1", "2", "--fix-deal", "1,2/3/4"]) == 0
    captured = capsys.readouterr()
    assert captured.out == (SPECS / "cluedo_4_2_1_2_fixed.kpa").read_text()
    assert _fields(captured.err)["deal_branches"] == "1"


def test_cluedo_gen_bad_config(capsys):
    assert main(["cluedo-gen", "8", "3", "2", "1"]) == 1


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "kepal", "validate", _spec("minimal.kpa")],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "valid=true" in res.stdout
