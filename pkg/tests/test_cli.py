import json
import subprocess
import sys

import pytest

from soccer_cep import __version__
from soccer_cep.cli import main
from soccer_cep.scenario import ScenarioSpec, save_script
from soccer_cep.trace import load_events


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    save_script(d / "script.json", [ScenarioSpec("Pass", seed=3), ScenarioSpec("Shot", "Goal", seed=4)])
    assert main(["generate", str(d / "script.json"), "-o", str(d / "gen")]) == 0
    assert main(["params", "-o", str(d / "params.json")]) == 0
    assert main(["detect", str(d / "gen/trace.csv"), "--params", str(d / "params.json"),
                 "--chunk", "64", "-o", str(d / "out.jsonl")]) == 0
    return d


def test_detect_finds_the_pass(work):
    log = load_events(work / "out.jsonl")
    assert any(e.event_type == "Pass" for e in log.complex)


def test_evaluate_identical_files(work, capsys):
    truth = str(work / "gen/truth.jsonl")
    assert main(["evaluate", truth, truth, "-o", str(work / "self.json")]) == 0
    report = json.loads((work / "self.json").read_text())
    assert all(row["f_score"] == 1.0 for row in report["types"] if row["tp"] + row["fn"] > 0)
    assert "Pass" in capsys.readouterr().out


def test_detection_matches_truth(work):
    assert main(["evaluate", str(work / "out.jsonl"), str(work / "gen/truth.jsonl"),
                 "-o", str(work / "report.json")]) == 0
    report = json.loads((work / "report.json").read_text())
    scored = [r for r in report["types"] if r["tp"] + r["fp"] + r["fn"] > 0]
    assert scored and all(r["precision"] == r["recall"] == 1.0 for r in scored)


def test_missing_trace(work, capsys):
    code = main(["detect", "missing.csv", "--params", str(work / "params.json"), "-o", str(work / "x")])
    assert code == 3
    err = capsys.readouterr().err.strip()
    assert "missing.csv" in err and "\n" not in err


def test_bad_rules(work, capsys):
    (work / "bad.cer").write_text("complex Pass: seq(KickingTheBall as k) within 5 emit roles {}\n")
    code = main(["detect", str(work / "gen/trace.csv"), "--params", str(work / "params.json"),
                 "--rules", str(work / "bad.cer"), "-o", str(work / "y.jsonl")])
    assert code == 4
    assert "bad.cer" in capsys.readouterr().err


def test_usage_errors():
    with pytest.raises(SystemExit) as err:
        main(["detect"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_version_and_help():
    out = subprocess.run([sys.executable, "-m", "soccer_cep", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
    out = subprocess.run([sys.executable, "-m", "soccer_cep", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert all(c in out.stdout for c in ("generate", "detect", "evaluate", "optimize", "stats"))


def test_stats(work, capsys):
    assert main(["stats", str(work / "out.jsonl"), "--csv", str(work / "d.csv")]) == 0
    assert "Pass" in capsys.readouterr().out
    assert (work / "d.csv").read_text().startswith("event_type")


def test_pipeline_is_byte_identical(work):
    runs = []
    for name in ("a", "b"):
        out = work / name
        main(["generate", str(work / "script.json"), "-o", str(out)])
        main(["detect", str(out / "trace.csv"), "--params", str(work / "params.json"),
              "-o", str(out / "det.jsonl")])
        runs.append([(out / f).read_bytes() for f in ("trace.csv", "truth.jsonl", "det.jsonl")])
    assert runs[0] == runs[1]


def test_optimize_small(work, tmp_path):
    train = tmp_path / "train"
    save_script(tmp_path / "s.json", [ScenarioSpec("Pass", seed=5), ScenarioSpec("Tackle", "won", seed=6)])
    assert main(["generate", str(tmp_path / "s.json"), "-o", str(train), "--split"]) == 0
    (tmp_path / "cfg.json").write_text(json.dumps({"population": 6, "archive": 3, "generations": 1}))
    assert main(["optimize", str(tmp_path / "cfg.json"), str(train), "-o", str(tmp_path / "arch.json"),
                 "--telemetry", str(tmp_path / "tele.csv")]) == 0
    members = json.loads((tmp_path / "arch.json").read_text())["members"]
    assert 1 <= len(members) <= 3
    assert main(["params", "--archive", str(tmp_path / "arch.json"), "-o", str(tmp_path / "p.json")]) == 0
    assert len((tmp_path / "tele.csv").read_text().splitlines()) == 1 + 2 * 16


def test_optimize_without_data(tmp_path):
    (tmp_path / "cfg.json").write_text("{}")
    (tmp_path / "empty").mkdir()
    assert main(["optimize", str(tmp_path / "cfg.json"), str(tmp_path / "empty"),
                 "-o", str(tmp_path / "a.json")]) == 3
