import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rkcompact import DomainError, SpaceDescriptor
from rkcompact.diagnostics import (TAU_B, TAU_E, TAU_NC, ReportConfig, berezin_boundary_profile,
                                   compactness_report, decomposition_error, equivalence_probe, essential_norm_proxy,
                                   profile_csv, theorem_rhs, verdict)
from rkcompact.geometry import build_covering
from rkcompact.operators import TruncatedOperator, identity, toeplitz, zero
from rkcompact.symbols import gaussian_decay, one_minus_r2, radial_step

B = SpaceDescriptor.bergman()
F = SpaceDescriptor.fock()


@pytest.fixture(scope="module")
def T_vanish():
    return toeplitz(B, one_minus_r2(), 60)


def test_profile_csv_format():
    text = profile_csv([(0.5, 1 / 3, 1e-17)])
    assert text == "shell_or_r,value,error_bar\n0.5,0.3333333333333333,1e-17\n"


# -- essential norm proxy --------------------------------------------------------


def test_proxy_examples():
    assert essential_norm_proxy(identity(B, 30), 10) == pytest.approx(1.0)
    assert essential_norm_proxy(zero(B, 30)) == 0
    k = np.arange(61)
    T = TruncatedOperator(B, 60, np.diag((k + 1) / (k + 2)))
    assert essential_norm_proxy(T, 40) == pytest.approx(61 / 62)


@pytest.mark.parametrize("m", [-1, 61, 2.5, True])
def test_proxy_rejects_bad_cutoff(m):
    with pytest.raises(DomainError):
        essential_norm_proxy(identity(B, 60), m)


def test_proxy_non_increasing_in_cutoff(T_vanish):
    vals = [essential_norm_proxy(T_vanish, m) for m in range(0, 61, 5)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_proxy_sees_off_diagonal_mass():
    M = np.zeros((11, 11))
    M[0, 10] = 0.7
    T = TruncatedOperator(B, 10, M)
    assert essential_norm_proxy(T, 5) == pytest.approx(0.7)
    assert essential_norm_proxy(TruncatedOperator(B, 10, M.T), 5) == pytest.approx(0.7)


# -- theorem right-hand side and Berezin profile ----------------------------------


def test_theorem_rhs_examples(T_vanish):
    assert theorem_rhs(zero(B, 20)).value == 0
    rhs = theorem_rhs(identity(B, 200), 1.0)
    assert rhs.value == pytest.approx(1.0, abs=1e-6 + rhs.error_bar)
    assert abs(abs(rhs.z) - 0.95) < 1e-12
    assert theorem_rhs(T_vanish, 1.0).value <= 0.15


def test_theorem_rhs_rejects_bad_radius():
    with pytest.raises(DomainError):
        theorem_rhs(identity(B, 10), 0.0)


def test_berezin_profile_identity():
    prof = berezin_boundary_profile(identity(B, 200))
    for v, e in zip(prof.values, prof.error_bars):
        assert abs(v - 1.0) <= 1e-12 + e
    assert not any(prof.refused)


def test_berezin_profile_one_minus_r2():
    prof = berezin_boundary_profile(toeplitz(B, one_minus_r2(), 100), (0.0, 0.3, 0.6, 0.9))
    assert prof.values[0] == pytest.approx(0.5, abs=1e-12)
    assert all(b < a for a, b in zip(prof.values, prof.values[1:]))


def test_berezin_profile_refuses_unresolved_shell():
    prof = berezin_boundary_profile(toeplitz(B, one_minus_r2(), 10), (0.5, 0.95))
    assert prof.refused == (False, True)
    assert prof.outermost[3]


def test_step_profile_bounded_below():
    prof = berezin_boundary_profile(toeplitz(B, radial_step(), 60))
    assert min(prof.values[2:]) > 0.5


# -- decomposition error -----------------------------------------------------------


def test_decomposition_zero_operator():
    res = decomposition_error(zero(B, 20), build_covering(B, 1.0, 2.0), resolution=(12, 32),
                              region_resolution=(12, 32))
    assert res.bound == 0 and res.max_ratio == 0


@pytest.mark.parametrize("r", [2.0, 3.0, 4.0])
def test_decomposition_fock_identity(r):
    res = decomposition_error(identity(F, 60), build_covering(F, r, 5.0), test_functions=False)
    assert res.bound == pytest.approx(2 * math.pi * math.exp(-r * r / 2), rel=0.1)


def test_decomposition_monotone_and_dominates(T_vanish):
    out = [decomposition_error(T_vanish, build_covering(B, r, 3.0), resolution=(16, 64),
                               region_resolution=(20, 32)) for r in (0.5, 1.0, 2.0)]
    bounds = [d.bound for d in out]
    assert all(b <= a for a, b in zip(bounds, bounds[1:]))
    for d in out:
        assert len(d.ratios) == 5
        assert d.max_ratio <= d.bound
    assert json.loads(json.dumps(out[0].to_dict()))["bound"] == bounds[0]


# -- equivalence probe ----------------------------------------------------------------


def test_equivalence_identity_and_zero():
    probe = equivalence_probe(identity(B, 200), shells=(0.6, 0.9))
    for _, a, ae, b, be, c, ce in probe.rows:
        for v, e in ((a, ae), (b, be), (c, ce)):
            assert v == pytest.approx(1.0, abs=1e-6 + e)
    probe = equivalence_probe(zero(B, 20), shells=(0.5,))
    assert probe.rows[0][1::2] == (0.0, 0.0, 0.0)


def test_equivalence_one_minus_r2_decreasing():
    probe = equivalence_probe(toeplitz(B, one_minus_r2(), 100), shells=(0.6, 0.8, 0.9, 0.95))
    for col in (1, 3, 5):
        vals = [row[col] for row in probe.rows]
        assert all(b < a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        probe.at_shell(0.7)
    assert probe.csv().splitlines()[0] == "shell,a,a_error_bar,b,b_error_bar,c,c_error_bar"


# -- verdict and report ------------------------------------------------------------------


@given(st.booleans(), st.floats(0, 2), st.floats(0, 2))
def test_verdict_rule(passed, b, e):
    v = verdict(passed, b, e)
    if passed and b < TAU_B and e < TAU_E:
        assert v == "compact-consistent"
    elif e > TAU_NC:
        assert v == "non-compact-consistent"
    else:
        assert v == "inconclusive"
    assert v == verdict(passed, b, e)


FAST = ReportConfig(localization_resolution=(32, 128), schur_resolution=(16, 64), region_resolution=(20, 32))


def test_report_one_minus_r2_compact():
    T = toeplitz(B, one_minus_r2(), 200)
    cfg = ReportConfig(shells=(0.0, 0.6, 0.9, 0.95, 0.98), localization_resolution=(32, 128),
                       schur_resolution=(16, 64), region_resolution=(20, 32))
    rep = compactness_report(T, cfg)
    assert rep.verdict == "compact-consistent"
    assert rep.berezin_boundary_sup == pytest.approx(0.0357, abs=5e-4)
    assert rep.essnorm_proxy < 0.01


def test_report_one_minus_r2_inconclusive_at_shell_095(T_vanish):
    rep = compactness_report(T_vanish, FAST)
    # the Berezin value at |z| = 0.95 is 0.0809 > 0.05
    assert rep.verdict == "inconclusive"
    assert rep.certificate.passed and rep.essnorm_proxy < TAU_E


@pytest.mark.parametrize("T", [identity(B, 60), toeplitz(B, radial_step(), 60)], ids=["identity", "step"])
def test_report_non_compact(T):
    rep = compactness_report(T, FAST, threads=2)
    assert rep.verdict == "non-compact-consistent"
    assert rep.berezin_boundary_sup > 0.5
    d = json.loads(rep.to_json())
    assert d["verdict"] == rep.verdict and d["config"]["schur_resolution"] == [16, 64]
    assert rep.proxy_rhs_ratio == pytest.approx(rep.essnorm_proxy / rep.theorem_rhs)


def test_report_fock_gaussian():
    rep = compactness_report(toeplitz(F, gaussian_decay(), 60), FAST)
    assert rep.verdict == "compact-consistent"


def test_report_refuses_unresolved_shell():
    with pytest.raises(DomainError, match="refused"):
        compactness_report(toeplitz(B, one_minus_r2(), 10), FAST)
