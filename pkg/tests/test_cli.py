import csv
import json
import subprocess
import sys

import pytest

from quasiriesz import __version__
from quasiriesz.cli import main


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def _manifest(out):
    return json.loads((out / "manifest.json").read_text(encoding="utf-8"))


def test_dichotomy_and_report(tmp_path):
    code, out = _run(tmp_path, "d", "dichotomy", "--interval", "0,a", "--n", "1000,20000")
    assert code == 0
    m = _manifest(out)
    assert m["verdict"] == "BoundedPredicted" and m["version"] == __version__
    assert m["scalars"]["certificate"] == [1, 0] and m["scalars"]["sup_abs_D"] < 1
    assert len(m["config_hash"]) == 64 and "discrepancy" in m["wall_time_s"]
    rows = (out / "discrepancy.csv").read_bytes().split(b"\n")
    assert rows[0] == b"n,D" and len(rows) == 20002 and b"\r" not in rows[1]
    summary = tmp_path / "summary.json"
    assert main(["report", str(out), "--out", str(summary)]) == 0
    s = json.loads(summary.read_text(encoding="utf-8"))
    assert s["certificate"] == [1, 0] and s["sup_abs_D"] < 1 and "schema_version" in s


def test_report_over_parent_directory(tmp_path):
    _run(tmp_path, "one", "dichotomy", "--interval", "0,1/2", "--n", "4096")
    _run(tmp_path, "two", "dichotomy", "--interval", "0,{2a}", "--n", "4096")
    assert main(["report", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert s["runs"]["one"]["verdict"] == "UnboundedBmoPredicted"
    assert s["runs"]["two"]["certificate"] == [2, -1]


def test_report_errors(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.json").write_text("{not json", encoding="utf-8")
    assert main(["report", str(bad)]) == 2
    assert "corrupt" in capsys.readouterr().err


def test_bad_alpha_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, "x", "dichotomy", "--alpha", "quad:1,0,4,2", "--interval", "0,1/2")
    assert code == 2
    assert "d is a perfect square" in capsys.readouterr().err


def test_measure_mismatch_and_bad_sizes(tmp_path):
    assert _run(tmp_path, "x", "gram", "--interval", "0,a", "--set", "I:0,1/2", "--sizes", "8,16")[0] == 2
    assert _run(tmp_path, "y", "gram", "--interval", "0,1/2", "--sizes", "16,8")[0] == 2
    assert _run(tmp_path, "z", "dichotomy", "--interval", "0,1/2", "--n", "10,5")[0] == 2


def test_gram_half_interval(tmp_path):
    code, out = _run(tmp_path, "g", "gram", "--interval", "0,1/2", "--sizes", "32,64,128,256",
                     "--dump-matrices")
    assert code == 0
    with open(out / "trend.csv", newline="") as fp:
        rows = list(csv.DictReader(fp))
    lmin = [float(r["lambda_min"]) for r in rows]
    assert all(b < a for a, b in zip(lmin, lmin[1:]))
    assert _manifest(out)["scalars"]["interlacing"] is True
    assert (out / "gram_32.bin").stat().st_size == 8 + 16 * 32 * 32


def test_determinism(tmp_path):
    args = ["variance", "--degree", "5", "--seed", "11", "--n", "10,100"]
    _, a = _run(tmp_path, "a", *args)
    _, b = _run(tmp_path, "b", *args)
    for name in ("variance.csv", "results.json", "polynomial.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert _manifest(a)["config_hash"] == _manifest(b)["config_hash"]
    assert main(["report", str(a), "--out", str(tmp_path / "sa.json")]) == 0
    assert main(["report", str(b), "--out", str(tmp_path / "sb.json")]) == 0
    assert (tmp_path / "sa.json").read_bytes() == (tmp_path / "sb.json").read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kind": "dichotomy", "interval": "0,1/2", "n": [1000]}), encoding="utf-8")
    code, out = _run(tmp_path, "c", "dichotomy", "--config", str(cfg), "--interval", "0,a")
    assert code == 0
    m = _manifest(out)
    assert m["config"]["interval"] == "0,a" and m["config"]["n"] == [1000]
    cfg.write_text(json.dumps({"kind": "gram"}), encoding="utf-8")
    assert _run(tmp_path, "d", "dichotomy", "--config", str(cfg))[0] == 2
    cfg.write_text(json.dumps({"bogus": 1}), encoding="utf-8")
    assert _run(tmp_path, "e", "dichotomy", "--config", str(cfg))[0] == 2


def test_variance_run(tmp_path):
    poly = tmp_path / "p.json"
    poly.write_text(json.dumps({"1": [1.0, 0.0]}), encoding="utf-8")
    code, out = _run(tmp_path, "v", "variance", "--poly", str(poly), "--n", "100,1000")
    assert code == 0
    s = _manifest(out)["scalars"]
    assert s["max_direct_kernel_gap"] <= 1e-10 and s["oracle_gap"] <= 1e-9
    assert s["kernel_below_limit"] is True


def test_coboundary_run(tmp_path):
    code, out = _run(tmp_path, "c", "coboundary", "--set", "C:(1)0,{3a}+(-1)0.1,a", "--n", "1000,10000",
                     "--x0", "1/3")
    assert code == 0
    m = _manifest(out)
    assert m["verdict"] == "CoboundaryFound" and m["scalars"]["cocycle_residual"] <= 1e-12
    code, out = _run(tmp_path, "h", "coboundary", "--interval", "0,1/2", "--n", "1000")
    assert code == 0 and _manifest(out)["verdict"] == "NoCertificate"


def test_pavlov_and_duality_runs(tmp_path):
    code, out = _run(tmp_path, "p", "pavlov", "--interval", "0,a", "--n", "1024,4096")
    assert code == 0
    assert (out / "pavlov.csv").read_text().splitlines()[0] == "N,l1,l2,window_start,window_end"
    code, out = _run(tmp_path, "u", "duality", "--interval", "0,a", "--set", "C:(1)0,{3a}+(-1)0.1,{2a}",
                     "--sizes", "16,32")
    assert code == 0
    assert _manifest(out)["scalars"]["interlacing"] is True


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "quasiriesz", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == __version__
    res = subprocess.run([sys.executable, "-m", "quasiriesz", "dichotomy", "--float", "--alpha",
                          "0.6180339887498948482", "--interval", "0,1/2", "--n", "1000",
                          "--out", str(tmp_path / "f")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr


@pytest.mark.parametrize("argv", [[], ["nonsense"]])
def test_usage_errors(argv):
    assert main(argv) == 2
