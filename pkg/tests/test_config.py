import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rkcompact import DomainError
from rkcompact.config import DEFAULTS, ExperimentConfig, load_config
from rkcompact.localization import BERGMAN_SHELLS, FOCK_SHELLS


def test_defaults_validate():
    cfg = ExperimentConfig.from_dict(None)
    assert DEFAULTS["degree"] is None and cfg.degree == 60
    assert ExperimentConfig.from_dict({"space": {"n": 2}}).degree == 20
    assert cfg.shells == BERGMAN_SHELLS
    assert cfg.params.a_T == pytest.approx(0.5)


def test_fock_defaults():
    cfg = ExperimentConfig.from_dict({"space": {"family": "fock", "alpha": 2.0},
                                      "symbol": {"name": "gaussian_decay", "scale": 0.5}})
    assert cfg.shells == FOCK_SHELLS and cfg.params is None
    assert cfg.space.alpha == 2.0
    assert cfg.covering_region == 5.0


def test_yaml_and_json_files(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("space:\n  family: bergman\nsymbol:\n  name: one_minus_r2\ndegree: 80\n"
                 "grids:\n  shells: [0.0, 0.5, 0.9]\n  z_grid: [[0.1, 0.2], [0.0, -0.5]]\n")
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"space": {"family": "bergman"}, "symbol": {"name": "one_minus_r2"}, "degree": 80,
                             "grids": {"shells": [0.0, 0.5, 0.9], "z_grid": [[0.1, 0.2], [0.0, -0.5]]}}))
    a, b = load_config(y), load_config(j)
    assert a.hash == b.hash
    assert a.z_grid == [0.1 + 0.2j, -0.5j]
    rc = a.report_config()
    assert rc.shells == (0.0, 0.5, 0.9) and rc.z_grid == (0.1 + 0.2j, -0.5j)


def test_hash_ignores_output_only():
    a = ExperimentConfig.from_dict({"output": "x"})
    b = ExperimentConfig.from_dict({"output": "y"})
    c = ExperimentConfig.from_dict({"seed": 3})
    assert a.hash == b.hash != c.hash
    assert len(a.hash) == 64


@given(st.integers(1, 400), st.sampled_from(["constant", "one_minus_r2", "radial_step", "angular"]),
       st.integers(0, 10 ** 6), st.floats(0.05, 0.99))
def test_roundtrip_and_hash_stability(D, sym, seed, shell):
    cfg = ExperimentConfig.from_dict({"degree": D, "symbol": {"name": sym}, "seed": seed,
                                      "grids": {"shells": [0.0, shell]}})
    back = ExperimentConfig.from_text(cfg.to_json())
    assert back.to_json() == cfg.to_json()
    assert back.hash == cfg.hash
    assert ExperimentConfig.from_dict(cfg.to_dict()).hash == cfg.hash


def test_two_dimensional_bergman_config():
    cfg = ExperimentConfig.from_dict({"space": {"n": 2}, "symbol": {"name": "one_minus_r2"}, "degree": 10,
                                      "grids": {"z_grid": [[[0.1, 0.0], [0.0, 0.2]]]}})
    assert cfg.z_grid == [[0.1, 0.2j]]
    assert cfg.report_config().covering_r is None


@pytest.mark.parametrize("bad", [
    {"degre": 10},
    {"space": {"family": "hardy"}},
    {"space": {"p": 1.0}},
    {"space": {"alpha": -1}},
    {"space": {"n": 0}},
    {"degree": 0},
    {"degree": 2.5},
    {"degree": True},
    {"symbol": {"name": "nope"}},
    {"symbol": "constant"},
    {"symbol": {"expression": "r"}},
    {"resolution": {"localization": [48, 255]}},
    {"resolution": {"disk": [6]}},
    {"grids": {"shells": [0.5, 0.3]}},
    {"grids": {"shells": [0.5, 1.0]}},
    {"grids": {"shells": []}},
    {"grids": {"r_list": [0.0, 1.0]}},
    {"grids": {"z_grid": [[0.8, 0.8]]}},
    {"grids": {"z_grid": [[0.1]]}},
    {"localization": {"delta": 2.0}},
    {"diagnostics": {"m": 61}},
    {"thresholds": {"tau_B": 0}},
    {"covering": {"shape": "cube"}},
    {"covering": {"r": -1}},
    {"rudin_forelli": {"refine": "yes"}},
    {"rudin_forelli": {"a": 0}},
    {"berezin_map": {"extent": 1.0}},
    {"berezin_map": {"points": 1}},
    {"seed": -1},
    {"output": ""},
    {"grids": "none"},
])
def test_validation_errors(bad):
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict(bad)


def test_unknown_key_message():
    with pytest.raises(DomainError, match="grids"):
        ExperimentConfig.from_dict({"grids": {"angle": 3}})


def test_load_errors(tmp_path):
    with pytest.raises(DomainError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("space: [unclosed\n")
    with pytest.raises(DomainError, match="cannot parse"):
        load_config(bad)
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("42\n")
    with pytest.raises(DomainError):
        load_config(scalar)
