import json
import subprocess
import sys

import pytest

from qpmdesign import cli
from qpmdesign.crystal_db import default_crystals


def run(*argv):
    return cli.main(list(argv))


def test_jsa_outputs_and_rerun(tmp_path, capsys):
    out = tmp_path / "jsa"
    assert run("jsa", "--crystal", "KTP", "--pump", "0.791", "--tau", "2.5", "--grid", "128", "--out", str(out)) == 0
    assert "P = 0.8" in capsys.readouterr().out
    names = {p.name for p in out.iterdir()}
    assert {"jsa_amplitude.txt", "jsa_intensity.txt", "marginals.csv", "report.json", "manifest.json"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["temperature_C"] == 50.0
    assert manifest["crystal_data"]["sha256"] == default_crystals().digest
    before = {p.name: p.read_bytes() for p in out.iterdir()}
    assert run("rerun", str(out / "manifest.json")) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before


def test_rerun_into_other_dir(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("bulk", "--crystal", "KTP", "--pump-range", "0.7", "0.72", "0.01", "--out", str(a)) == 0
    assert run("rerun", str(a / "manifest.json"), "--out", str(b)) == 0
    assert (a / "bulk.csv").read_bytes() == (b / "bulk.csv").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_rerun_detects_changes(tmp_path):
    a = tmp_path / "a"
    run("bulk", "--crystal", "KTP", "--pump-range", "0.7", "0.7", "0.01", "--out", str(a))
    m = json.loads((a / "manifest.json").read_text())
    m["outputs"]["bulk.csv"] = "0" * 64
    (a / "manifest.json").write_text(json.dumps(m))
    assert run("rerun", str(a / "manifest.json"), "--out", str(tmp_path / "b")) == 3


@pytest.mark.parametrize("argv,code", [
    (["jsa", "--pump", "0.791"], 2),
    (["jsa", "--crystal", "KTP"], 2),
    ([], 2),
    (["--figure", "99"], 2),
    (["jsa", "--crystal", "BBO", "--pump", "0.791"], 3),
    (["jsa", "--crystal", "KTP", "--pump", "0.791", "--pols", "x:yz"], 3),
    (["jsa", "--crystal", "KTP", "--pump", "0.791", "--period", "40"], 3),
    (["filter", "--crystal", "KTP", "--pump", "0.791", "--grid", "32", "--fwhm", "0.001"], 3),
])
def test_exit_codes(tmp_path, capsys, argv, code):
    if argv and argv[0] != "--figure":
        argv = [*argv, "--out", str(tmp_path)]
    assert run(*argv) == code
    assert capsys.readouterr().err.strip()


def test_single_line_diagnostic(tmp_path, capsys):
    run("jsa", "--crystal", "BBO", "--pump", "0.791", "--out", str(tmp_path))
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_gvm_and_format_json(tmp_path):
    out = tmp_path / "g"
    assert run("gvm", "--crystal", "KTP", "--scan", "0.79", "0.79", "0.01", "--format", "json", "--out", str(out)) == 0
    data = json.loads((out / "gvm.json").read_text())
    assert abs(data["lambda_p_um"] - 0.791) < 0.003
    rows = json.loads((out / "degenerate_scan.json").read_text())
    assert rows[0]["lambda_p_um"] == pytest.approx(0.79)


def test_filter_cmd(tmp_path):
    out = tmp_path / "f"
    assert run("filter", "--crystal", "KTP", "--pump", "0.791", "--grid", "256", "--fwhm", "4", "--out", str(out)) == 0
    lines = (out / "filter.csv").read_text().splitlines()
    assert lines[0].startswith("filter_fwhm_nm") and len(lines) == 3


def test_custom_data_file(tmp_path):
    src = default_crystals().path
    copy = tmp_path / "c.yaml"
    copy.write_bytes(open(src, "rb").read())
    assert run("bulk", "--crystal", "RTP", "--data", str(copy), "--pump-range", "0.8", "0.8", "0.01",
               "--out", str(tmp_path / "o")) == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["crystal_data"]["sha256"] == default_crystals().digest


def test_figure_list(capsys):
    assert run("--figure", "list") == 0
    assert "atlas-type2" in capsys.readouterr().out


def test_plot(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "p"
    assert run("jsa", "--crystal", "KTP", "--pump", "0.791", "--grid", "64", "--plot", "--out", str(out)) == 0
    assert (out / "jsa.png").exists()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "qpmdesign.cli", "gvm", "--crystal", "KTP", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "791" in r.stdout
