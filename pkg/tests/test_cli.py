"""Command-line interface: dispatch, documents, formats, exit codes."""

import json
from fractions import Fraction

import numpy as np
import pytest

from kfree.cli import dispatch
from kfree.matio import load_operator, save_operator


def run(capsys, *argv):
    code = dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_fraction(s):
    if "/" in s:
        p, q = s.split("/")
        return Fraction(int(p), int(q))
    return Fraction(int(s))


def test_wg_values(capsys):
    code, out, _ = run(capsys, "wg", "--k", "2", "--dim", "3")
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "wg"
    assert doc["version"]
    wg = doc["result"]["weingarten"]
    assert parse_fraction(wg[0][0]) == Fraction(3, 24)
    assert parse_fraction(wg[0][1]) == Fraction(-1, 24)
    gram = doc["result"]["gram"]
    assert [[int(x) for x in row] for row in gram] == [[9, 3], [3, 9]]


def test_nc_count(capsys):
    code, out, _ = run(capsys, "nc", "--n", "4", "--count")
    assert code == 0
    assert json.loads(out)["result"]["count"] == 14


def test_nc_kreweras_listing(capsys):
    code, out, _ = run(capsys, "nc", "--n", "3", "--kreweras")
    doc = json.loads(out)
    assert doc["result"]["count"] == 5
    assert doc["result"]["kreweras"]["{{1,2,3}}"] == "{{1}, {2}, {3}}"


def test_perm_report(capsys):
    code, out, _ = run(capsys, "perm", "--perm", "2,3,1", "--geodesic")
    doc = json.loads(out)
    assert doc["result"]["num_cycles"] == 1
    assert doc["result"]["length"] == 2
    assert doc["result"]["nc_image"] == "{{1,2,3}}"
    assert len(doc["result"]["geodesic_set"]) == 5


def test_otoc_traceless_specialization(capsys):
    code, out, _ = run(capsys, "otoc", "--k", "2", "--a-moments", "0,1", "--b-moments", "0.7,1.4")
    assert code == 0
    value = json.loads(out)["result"]["formula"]
    assert abs(value[0] - 0.49) < 1e-12 and abs(value[1]) < 1e-12


def test_channel_exact_values(capsys):
    code, out, _ = run(capsys, "channel", "--k", "2", "--dim", "2", "--mode", "exact", "--moments", "0,1")
    doc = json.loads(out)
    coeffs = doc["result"]["coefficients"]
    assert parse_fraction(coeffs["(1,2)"]) == Fraction(-1, 3)
    assert parse_fraction(coeffs["(2,1)"]) == Fraction(2, 3)


def test_cumulants_from_moments(capsys):
    code, out, _ = run(capsys, "cumulants", "--moments", "0,1,0,2")
    doc = json.loads(out)
    kappa = doc["result"]["kappa"]
    assert abs(kappa["2"][0] - 1.0) < 1e-12
    assert abs(kappa["4"][0]) < 1e-12


def test_cumulants_from_operator_file(tmp_path, capsys):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((6, 6))
    m = m + m.T
    path = tmp_path / "op.json"
    save_operator(path, m)
    code, out, _ = run(capsys, "cumulants", "--operator", str(path), "--max-order", "3")
    doc = json.loads(out)
    assert abs(doc["result"]["kappa"]["1"][0] - np.trace(m) / 6) < 1e-10


def test_operator_roundtrip_binary(tmp_path):
    rng = np.random.default_rng(1)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    path = tmp_path / "op.bin"
    save_operator(path, m)
    assert np.allclose(load_operator(path), m)


def test_design_check_cli(capsys):
    code, out, _ = run(capsys, "design-check", "--ensemble", "clifford", "--k", "3")
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["passed"] is True
    code, out, _ = run(capsys, "design-check", "--ensemble", "pauli", "--k", "2")
    assert json.loads(out)["result"]["passed"] is False


def test_distance_cli(capsys):
    code, out, _ = run(
        capsys, "distance", "--ensemble", "hamiltonian", "--k", "1", "--dim", "8",
        "--t-max", "3000", "--n-samples", "500", "--seed", "3",
    )
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["distance"] > 1.0


def test_haar_test_cli(capsys):
    code, out, _ = run(capsys, "haar-test", "--dim", "16", "--k", "1", "--n-samples", "200", "--seed", "5")
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["n_samples"] == 200
    assert abs(doc["result"]["estimate"][0]) < 0.2


def test_eth_build_and_cumulant(tmp_path, capsys):
    code, out, _ = run(capsys, "eth", "build", "--model", "goe", "--dim", "64", "--seed", "2")
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["dim"] == 64
    assert doc["result"]["observables"] == ["A", "B"]

    csv_path = tmp_path / "scan.csv"
    code, _, _ = run(
        capsys, "eth", "cumulant", "--model", "goe", "--dim", "32", "--seed", "2",
        "--k", "1", "--t-max", "2.0", "--n-points", "5", "--format", "csv",
        "--output", str(csv_path),
    )
    assert code == 0
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "t,real,imag,std_error"
    assert len(lines) == 6


def test_eth_timeavg_cli(capsys):
    code, out, _ = run(capsys, "eth", "timeavg", "--model", "goe", "--dim", "48", "--seed", "7", "--k", "2")
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["mode"] == "infinite"
    assert abs(doc["result"]["value"][0]) < 0.05


def test_exit_codes():
    assert dispatch(["wg", "--k", "3", "--dim", "2"]) == 2
    assert dispatch(["nc", "--n", "99"]) == 1
    assert dispatch(["nonexistent-command"]) == 1
    assert dispatch(["wg", "--k", "2"]) == 1  # missing required --dim


def test_byte_identical_reruns(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["haar-test", "--dim", "8", "--k", "1", "--n-samples", "50", "--seed", "11"]
    assert dispatch(argv + ["--output", str(out1)]) == 0
    assert dispatch(argv + ["--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_config_file_defaults_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nn = 4\ncount = true\n")
    code, out, _ = run(capsys, "nc", "--config", str(cfg))
    assert code == 0
    assert json.loads(out)["result"]["count"] == 14
    # explicit flag overrides the config value
    code, out, _ = run(capsys, "nc", "--config", str(cfg), "--n", "5")
    assert json.loads(out)["result"]["count"] == 42


def test_text_format(capsys):
    code, out, _ = run(capsys, "nc", "--n", "3", "--count", "--format", "text")
    assert code == 0
    assert "count = 5" in out
