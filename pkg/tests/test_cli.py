import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from rkcompact import NumericalError, cli
from rkcompact.operators import TruncatedOperator

FAST_RES = {"localization": [24, 64], "schur": [12, 32], "region": [12, 32], "rudin_forelli": [32, 64]}


def write_config(tmp_path, **overrides):
    cfg = {"degree": 40, "resolution": dict(FAST_RES), "grids": {"shells": [0.0, 0.5, 0.8], "angles": 4,
                                                                   "r_list": [0.5, 1.0, 2.0, 4.0]},
           "covering": {"samples": 300}}
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k] = {**cfg[k], **v}
        else:
            cfg[k] = v
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def read_csv(path, numeric=True):
    text = path.read_bytes().decode("utf-8")
    assert "\r" not in text and text.endswith("\n")
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [[float(x) for x in r] if numeric else r for r in rows[1:]]


@pytest.mark.parametrize("sub", sorted(cli.SUBCOMMANDS))
def test_every_subcommand_runs(tmp_path, sub):
    out = tmp_path / "out"
    code = cli.main([sub, "--config", str(write_config(tmp_path, symbol={"name": "one_minus_r2"})),
                     "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["subcommand"] == sub
    assert set(report["artifacts"]) == {p.name for p in out.iterdir()}
    assert "config.echo.json" in report["artifacts"]
    for name in report["artifacts"]:
        if name.endswith(".csv"):
            header, rows = read_csv(out / name, numeric=name != "identities.csv")
            assert all(len(r) == len(header) for r in rows)


def test_echo_matches_loaded_config(tmp_path):
    path = write_config(tmp_path)
    cli.main(["toeplitz", "--config", str(path), "--out", str(tmp_path / "a")])
    cli.main(["toeplitz", "--config", str(path), "--out", str(tmp_path / "b")])
    echo_a = (tmp_path / "a" / "config.echo.json").read_bytes()
    assert echo_a == (tmp_path / "b" / "config.echo.json").read_bytes()
    assert json.loads(echo_a)["degree"] == 40


def test_rudin_forelli_first_row(tmp_path):
    out = tmp_path / "rf"
    path = write_config(tmp_path, grids={"shells": [0.0, 0.5]}, rudin_forelli={"a": 0.5})
    assert cli.main(["rudin-forelli", "--config", str(path), "--out", str(out)]) == 0
    header, rows = read_csv(out / "rudin_forelli.csv")
    assert header == ["shell_or_r", "value", "error_bar"]
    r, val, bar = rows[0]
    assert r == 0.0 and abs(val - 2.0) <= max(bar, 1e-10)


def test_berezin_map_of_identity(tmp_path):
    out = tmp_path / "bm"
    path = write_config(tmp_path, degree=120, berezin_map={"extent": 0.9, "points": 15})
    assert cli.main(["berezin-map", "--config", str(path), "--out", str(out)]) == 0
    header, rows = read_csv(out / "berezin_map.csv")
    assert header == ["re", "im", "value", "value_imag", "error_bar"]
    vals = np.array(rows)
    assert np.all(np.abs(vals[:, 2] - 1.0) <= vals[:, 4] + 1e-12)
    assert np.all(np.hypot(vals[:, 0], vals[:, 1]) < 1)


def test_toeplitz_operator_artifact(tmp_path):
    out = tmp_path / "t"
    cli.main(["toeplitz", "--config", str(write_config(tmp_path, symbol={"name": "r2"})), "--out", str(out)])
    T = TruncatedOperator.from_json((out / "operator.json").read_text())
    k = np.arange(41)
    np.testing.assert_allclose(np.diag(T.matrix).real, (k + 1) / (k + 2), atol=1e-12)


def test_compactness_verdict_one_minus_r2(tmp_path):
    out = tmp_path / "c"
    path = write_config(tmp_path, degree=200, symbol={"name": "one_minus_r2"},
                        grids={"shells": [0.0, 0.6, 0.9, 0.95, 0.98], "angles": 8,
                               "r_list": [0.5, 1, 2, 3, 4, 5, 6]})
    assert cli.main(["compactness", "--config", str(path), "--out", str(out), "--threads", "2"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["result"]["verdict"] == "compact-consistent"


def test_compactness_step_non_compact(tmp_path):
    out = tmp_path / "s"
    path = write_config(tmp_path, degree=60, symbol={"name": "radial_step"},
                        grids={"shells": [0.0, 0.6, 0.9, 0.95]})
    assert cli.main(["compactness", "--config", str(path), "--out", str(out)]) == 0
    res = json.loads((out / "report.json").read_text())["result"]
    assert res["verdict"] == "non-compact-consistent"
    assert min(res["berezin_profile"]["values"][1:]) > 0.5


def test_validation_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("degre: 3\n")
    assert cli.main(["toeplitz", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["kind"] == "validation" and "degre" in err["message"]
    assert cli.main(["toeplitz", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["kind"] == "validation"
    assert cli.main(["toeplitz", "--config", str(write_config(tmp_path)), "--threads", "0"]) == 2


def test_runtime_domain_error_exit_code(tmp_path):
    # a shell the truncation cannot resolve is refused
    path = write_config(tmp_path, degree=10, symbol={"name": "one_minus_r2"}, grids={"shells": [0.0, 0.95]})
    out = tmp_path / "r"
    assert cli.main(["compactness", "--config", str(path), "--out", str(out)]) == 2
    assert "refused" in json.loads((out / "error.json").read_text())["message"]


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg, w, threads):
        raise NumericalError("singular value decomposition did not converge")

    monkeypatch.setitem(cli.SUBCOMMANDS, "spectrum", boom)
    out = tmp_path / "n"
    assert cli.main(["spectrum", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 3
    assert json.loads((out / "error.json").read_text())["kind"] == "numerical"


def test_unbounded_fock_symbol_is_a_validation_error(tmp_path):
    path = write_config(tmp_path, space={"family": "fock"}, symbol={"name": "r2", "sup_bound": 10.0})
    assert cli.main(["toeplitz", "--config", str(path), "--out", str(tmp_path / "u")]) == 2


def test_console_script(tmp_path):
    out = tmp_path / "k"
    proc = subprocess.run([sys.executable, "-m", "rkcompact.cli", "kernel-identities", "--config",
                           str(write_config(tmp_path)), "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["result"]["passed"] is True
