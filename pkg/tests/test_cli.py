import json
import os
import subprocess
import sys

import pytest

from hardhex import build_grid, landscape
from hardhex.cli import dispatch, read_config_file
from hardhex.config import stable_config


def run(argv, capsys):
    code = dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def manifest(outdir):
    with open(os.path.join(outdir, "manifest.json")) as fh:
        return json.load(fh)


def test_verify_structure_passes(tmp_path, capsys):
    code, out, _ = run(["verify-structure", "--K", "2", "--L", "1", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.strip().endswith("PASS")
    m = manifest(tmp_path)
    assert m["subcommand"] == "verify-structure" and m["exit_code"] == 0
    assert m["outputs"] == ["structure.json"]
    assert all(os.path.exists(tmp_path / p) for p in m["outputs"])
    assert json.loads((tmp_path / "structure.json").read_text())["passed"]
    for key in ("version", "rng", "started", "finished", "parameters", "schema_version"):
        assert key in m


def test_verify_structure_failure_exit_code(tmp_path, capsys, monkeypatch):
    real = landscape.verify_structure

    def broken(index):
        rep = real(index)
        rep.clauses["(ii) pairwise barriers equal min{K,2L}+1"] = False
        return rep

    monkeypatch.setattr(landscape, "verify_structure", broken)
    code, out, _ = run(["verify-structure", "--K", "2", "--L", "1", "--out", str(tmp_path)], capsys)
    assert code == 1 and "FAIL" in out
    assert manifest(tmp_path)["exit_code"] == 1


def test_ref_path_prints_gap(tmp_path, capsys):
    code, out, _ = run(["ref-path", "--K", "2", "--L", "2", "--from", "a", "--to", "b",
                        "--out", str(tmp_path), "--emit", "ab.json"], capsys)
    assert code == 0 and "height gap 3" in out
    doc = json.loads((tmp_path / "ab.json").read_text())
    assert doc["height_gap"] == 3 and len(doc["states"]) == len(doc["energies"])
    assert doc["states"][-1] == stable_config(build_grid((2, 2)), "b").to_hex()


@pytest.mark.parametrize("argv", [
    ["simulate", "--K", "1", "--L", "1", "--beta", "1"],
    ["bogus"],
    [],
    ["simulate", "--K", "2", "--L", "1"],
    ["simulate", "--K", "2", "--L", "1", "--beta", "-1"],
    ["simulate", "--K", "2", "--L", "1", "--beta", "1", "--target", "xyz"],
    ["verify-structure", "--K", "3", "--L", "2"],
    ["ref-path", "--K", "2", "--L", "1", "--from", "a", "--to", "a"],
    ["mix", "--K", "2", "--L", "1", "--beta", "1", "--eps", "0"],
    ["campaign", "--K", "2", "--L", "1"],
    ["campaign", "--K", "2", "--L", "1", "--betas", "2", "1"],
    ["verify-structure"],
    ["verify-structure", "--K", "2", "--L", "1", "--threads", "0"],
])
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    code, _, _ = run(argv + ["--out", str(tmp_path / "o")] if argv else argv, capsys)
    assert code == 2


def test_simulate_output_and_determinism(tmp_path, capsys):
    args = ["simulate", "--K", "2", "--L", "1", "--beta", "1", "--samples", "20", "--seed", "4"]
    assert run(args + ["--out", str(tmp_path / "x")], capsys)[0] == 0
    assert run(["--seed", "4", "--threads", "3"] + args[:-2] + ["--out", str(tmp_path / "y")], capsys)[0] == 0
    a = (tmp_path / "x" / "samples.csv").read_text()
    assert a == (tmp_path / "y" / "samples.csv").read_text()
    lines = a.splitlines()
    header = json.loads(lines[0][2:])
    assert header["seed"] == 4 and header["grid"] == {"K": 2, "L": 1} and "rng" in header
    assert lines[1] == "sample_id,steps,hit_state" and len(lines) == 22
    assert {ln.split(",")[2] for ln in lines[2:]} <= {"b", "c"}
    assert manifest(tmp_path / "y")["parameters"]["seed"] == 4


def test_simulate_start_from_file(tmp_path, capsys):
    g = build_grid((2, 1))
    cfg = tmp_path / "start.txt"
    cfg.write_text(stable_config(g, "b").to_ascii() + "\n")
    code, _, _ = run(["simulate", "--K", "2", "--L", "1", "--beta", "0.5", "--start", str(cfg),
                      "--target", "a", "--samples", "5", "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    rows = (tmp_path / "o" / "samples.csv").read_text().splitlines()[2:]
    assert all(r.endswith(",a") for r in rows)


def test_reduce(tmp_path, capsys):
    g = build_grid((2, 2))
    b = stable_config(g, "b")
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(b.flip(b.occupied()[0]).to_hex())
    code, out, _ = run(["reduce", "--K", "2", "--L", "2", "--input", str(cfg), "--mode", "rows",
                        "--target", "b", "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and "height gap" in out
    doc = json.loads((tmp_path / "o" / "path.json").read_text())
    assert doc["valid"] and doc["states"][-1] == b.to_hex()
    cfg.write_text(stable_config(g, "a").to_hex())
    code, _, err = run(["reduce", "--K", "2", "--L", "2", "--input", str(cfg), "--mode", "columns",
                        "--target", "b", "--out", str(tmp_path / "p")], capsys)
    assert code == 2 and "offending sites" in err
    code, _, _ = run(["reduce", "--K", "2", "--L", "2", "--input", str(tmp_path / "missing"),
                      "--mode", "rows", "--out", str(tmp_path / "q")], capsys)
    assert code == 2


def test_symmetry_check(tmp_path, capsys):
    code, out, _ = run(["symmetry-check", "--K", "2", "--L", "1", "--beta", "1", "--samples", "300",
                        "--seed", "1", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.strip().endswith("PASS")
    doc = json.loads((tmp_path / "symmetry.json").read_text())
    assert doc["passed"] and all(doc["automorphisms"].values())


def test_symmetry_check_failure(tmp_path, capsys):
    code, _, _ = run(["symmetry-check", "--K", "2", "--L", "2", "--beta", "3", "--samples", "100",
                      "--cap", "10", "--out", str(tmp_path)], capsys)
    assert code == 1


def test_spectrum_and_mix(tmp_path, capsys):
    code, out, _ = run(["spectrum", "--K", "2", "--L", "1", "--beta", "0", "2", "--out", str(tmp_path / "s")], capsys)
    assert code == 0 and "5.01585" in out
    code, out, _ = run(["mix", "--K", "2", "--L", "1", "--beta", "0", "1", "--out", str(tmp_path / "m")], capsys)
    assert code == 0 and "t_mix(0.25) = 39" in out and "= 210" in out
    doc = json.loads((tmp_path / "m" / "mix.json").read_text())
    assert [r["t_mix"] for r in doc["results"]] == [39, 210]


def test_enumerate(tmp_path, capsys):
    code, out, _ = run(["enumerate", "--K", "2", "--L", "1", "--dump-grid", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.startswith("58 ")
    assert sorted(manifest(tmp_path)["outputs"]) == ["enumerate.json", "grid.json"]


def test_campaign_from_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# campaign\nK = 2\nL = 1\nbetas = 0.5, 1.0  # sweep\nsamples = 100\nseed = 3\n",
                   encoding="utf-8")
    code, out, _ = run(["campaign", "--config", str(cfg), "--out", str(tmp_path / "a")], capsys)
    assert code == 0 and "Gamma" in out
    m = manifest(tmp_path / "a")
    assert m["parameters"]["betas"] == [0.5, 1.0] and m["parameters"]["seed"] == 3
    assert sorted(m["outputs"]) == ["metadata.json", "samples.csv", "summary.json"]
    # flag overrides config; same spec gives byte-identical raw samples
    code, _, _ = run(["campaign", "--config", str(cfg), "--samples", "100", "--format", "markdown",
                      "--eps", "0.75", "--out", str(tmp_path / "b")], capsys)
    assert code == 0
    assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()
    assert "windows.json" in manifest(tmp_path / "b")["outputs"]
    code, _, _ = run(["campaign", "--config", str(cfg), "--samples", "120", "--out", str(tmp_path / "c")], capsys)
    assert (tmp_path / "c" / "samples.csv").read_text().count("\n") == 241


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense_key = 1\n")
    assert run(["verify-structure", "--config", str(bad)], capsys)[0] == 2
    bad.write_text("K = two\n")
    assert run(["verify-structure", "--config", str(bad)], capsys)[0] == 2
    assert run(["verify-structure", "--config", str(tmp_path / "none.cfg")], capsys)[0] == 2
    good = tmp_path / "g.cfg"
    good.write_text("K=2\nL=1\n")
    assert read_config_file(str(good)) == {"K": "2", "L": "1"}


def test_default_output_directory(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["enumerate", "--K", "2", "--L", "1"], capsys)[0] == 0
    assert (tmp_path / "runs" / "enumerate" / "manifest.json").exists()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hardhex.cli", "ref-path", "--K", "3", "--L", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "height gap 3" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "hardhex.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "hardhex" in proc.stdout
