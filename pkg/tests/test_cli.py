import csv
import json

import numpy as np
import pytest

from sensornet.cli import EXIT_EMPTY, EXIT_FORMAT, EXIT_IO, EXIT_VALIDATION, config_to_argv, main
from sensornet.data import load_readings, write_wide_csv
from sensornet.sources import ObserverScenario, generate, observer_readings, xor_triple

from conftest import CONFIGS, DATA, ROOT


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def xor_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("xor") / "xor.csv"
    write_wide_csv(p, generate(xor_triple(seed=1), 100_000).symbols)
    return p


def test_analyze_xor(xor_csv, tmp_path):
    assert run("analyze", xor_csv, "-o", tmp_path, "--round") == 0
    doc = json.loads((tmp_path / "entropy.json").read_text())
    assert doc["kind"] == "empirical-first-order"
    assert abs(doc["values"]["7"] - 2.0) < 0.02
    assert json.loads((tmp_path / "axioms.json").read_text())["is_polymatroid"]
    ranks = (tmp_path / "matroid.csv").read_text().splitlines()
    assert ranks[0] == "mask,rank" and ranks[-1] == "7,2"
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "analyze" and manifest["version"]


def test_analyze_lz_subsets(xor_csv, tmp_path):
    assert run("analyze", xor_csv, "-o", tmp_path, "--estimator", "lz", "--subset", "1,2", "--subset", "1") == 0
    doc = json.loads((tmp_path / "entropy.json").read_text())
    assert doc["kind"] == "lz78" and set(doc["values"]) == {"1", "3"}
    assert not (tmp_path / "axioms.json").exists()


def test_analyze_empty_file(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert run("analyze", p, "-o", tmp_path / "o") == EXIT_EMPTY
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "empty_input" and err["exit_code"] == EXIT_EMPTY


def test_error_codes(tmp_path, capsys):
    assert run("analyze", tmp_path / "missing.csv", "-o", tmp_path) == EXIT_IO
    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    assert run("analyze", bad, "-o", tmp_path) == EXIT_FORMAT
    ok = tmp_path / "ok.csv"
    ok.write_text("t,s1\n1,0\n2,1\n")
    assert run("select-random", ok, "--q", "1.5", "-o", tmp_path) == EXIT_VALIDATION
    assert run("analyze") == 2


def test_phrases_golden(tmp_path):
    assert run("analyze", DATA / "golden_parse.csv", "-o", tmp_path, "--phrases", "1") == 0
    assert (tmp_path / "phrases.txt").read_bytes() == (DATA / "golden_parse_phrases.txt").read_bytes()


def test_fuse_ordered_pairs(tmp_path):
    readings, truth = observer_readings(ObserverScenario(seed=2), 300)
    p = tmp_path / "r.csv"
    write_wide_csv(p, readings, truth)
    out = tmp_path / "o"
    assert run("fuse", p, "--family", "ordered-pairs", "-o", out, "--weights-stride", "50") == 0
    doc = json.loads((out / "fusion.json").read_text())
    assert doc["num_competitors"] == 240
    rows = list(csv.reader((out / "weights.csv").open()))
    assert len(rows[0]) == 241 and rows[0][16] == "avg(1,1)"
    # rows t = 0, 50, ..., 300 plus the header
    assert len(rows) == 1 + 7


def test_fuse_stream_matches(tmp_path):
    readings, truth = observer_readings(ObserverScenario(num_sensors=4, seed=3), 200)
    p = tmp_path / "r.csv"
    write_wide_csv(p, readings, truth)
    assert run("fuse", p, "--family", "max:2", "-o", tmp_path / "a", "--seed", 5) == 0
    assert run("fuse", p, "--family", "max:2", "-o", tmp_path / "b", "--seed", 5, "--stream") == 0
    a = json.loads((tmp_path / "a" / "fusion.json").read_text())
    b = json.loads((tmp_path / "b" / "fusion.json").read_text())
    assert a["chosen"] == b["chosen"]


def test_fuse_needs_truth(tmp_path):
    p = tmp_path / "r.csv"
    write_wide_csv(p, np.array([[0, 1, 1], [1, 1, 0]]))
    assert run("fuse", p, "--loss", "hamming", "-o", tmp_path / "o") == EXIT_VALIDATION
    assert run("fuse", p, "--loss", "hamming", "--adversarial", "-o", tmp_path / "o") == 0


def test_byte_identical_reruns(xor_csv, tmp_path):
    for d in ("a", "b"):
        assert run("select-greedy", xor_csv, "-o", tmp_path / d) == 0
        assert run("analyze", xor_csv, "-o", tmp_path / d, "--round") == 0
    for name in ("greedy.json", "entropy.json", "entropy.csv", "axioms.json", "matroid.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_greedy_output(xor_csv, tmp_path, capsys):
    assert run("select-greedy", xor_csv, "-o", tmp_path, "--workers", 2) == 0
    doc = json.loads((tmp_path / "greedy.json").read_text())
    assert len(doc["final_members"]) == 2
    assert "final {" in capsys.readouterr().out


def test_simulate_then_analyze(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({**xor_triple(seed=4).to_dict(), "n": 5000}))
    assert run("simulate", spec, "-o", tmp_path / "sim") == 0
    analytic = json.loads((tmp_path / "sim" / "analytic.json").read_text())
    assert analytic["values"]["7"] == pytest.approx(2.0)
    assert run("analyze", tmp_path / "sim" / "matrix.csv", "-o", tmp_path / "an") == 0
    emp = json.loads((tmp_path / "an" / "entropy.json").read_text())
    assert abs(emp["values"]["7"] - 2.0) < 0.05


def test_simulate_observers(tmp_path):
    assert run("simulate", CONFIGS / "fusion_observers.json", "--n", 100, "-o", tmp_path) == 0
    r, x = load_readings(tmp_path / "readings.csv")
    assert r.shape == (15, 100) and x.shape == (100,)


def test_config_to_argv():
    argv = config_to_argv({"command": "fuse", "input": "x.csv", "family": ["max:2", "median:3"], "doubling": True, "eta": "auto"})
    assert argv[:2] == ["fuse", "x.csv"]
    assert argv.count("--family") == 2 and "--doubling" in argv


def test_checked_in_run_configs(tmp_path):
    sim = json.loads((CONFIGS / "runs" / "table2_sim.json").read_text())
    sim.update(spec=str(ROOT / sim["spec"]), output_dir=str(tmp_path / "sim"))
    draws = json.loads((CONFIGS / "runs" / "table2_draws.json").read_text())
    draws.update(input=str(tmp_path / "sim" / "matrix.csv"), output_dir=str(tmp_path / "draws"))
    for name, cfg in (("sim.json", sim), ("draws.json", draws)):
        (tmp_path / name).write_text(json.dumps(cfg))
        assert run("--config", tmp_path / name) == 0
    doc = json.loads((tmp_path / "draws" / "selection.json").read_text())
    assert len(doc["draws"]) == 20
    assert all(len(d["members"]) == 5 for d in doc["draws"])
    manifest = json.loads((tmp_path / "draws" / "manifest.json").read_text())
    assert manifest["config"]["q"] == 0.5
