import json
import math

import numpy as np
import pytest

from arrhenius_rd import construct as cs
from arrhenius_rd import dsolve


@pytest.fixture(scope="module")
def build():
    return dsolve.build_diffusivity(R0=1.0)


def test_golden_values(build):
    for theta, ref in dsolve.GOLDEN.items():
        assert dsolve.sig_fig_match(build.integral(theta), ref, 11), theta


def test_sig_fig_match():
    assert dsolve.sig_fig_match(1.23456789012, 1.23456789011, 11)
    assert not dsolve.sig_fig_match(1.2345678902, 1.2345678901, 11)
    assert dsolve.sig_fig_match(1e-13, 0.0, 11)


def test_build_matches_ode_oracle(build):
    du, dD = dsolve.check_against_oracle(build)
    assert du < 1e-10 and dD < 1e-9


def test_build_bounds(build):
    th = np.geomspace(1e-3, build.theta_max, 3000)
    D = build(th)
    assert build(0.0) == pytest.approx(1.0, abs=1e-12)
    assert D.min() >= 1.0 - 1e-12
    assert D.max() <= dsolve.dm_bound(1.0)


def test_build_json_round_trip(build, tmp_path):
    path = tmp_path / "d.json"
    build.to_json(path)
    again = dsolve.PiecewiseDiffusivity.from_json(str(path))
    th = np.linspace(0.01, 19.0, 57)
    np.testing.assert_allclose(again(th), build(th), rtol=1e-13)
    assert json.loads(build.to_json())["format"] == "arrhenius-rd/piecewise-diffusivity"
    with pytest.raises(ValueError):
        dsolve.PiecewiseDiffusivity.from_dict({"format": "other"})


def test_build_range_guard(build):
    with pytest.raises(ValueError):
        build(build.theta_max * 1.01)
    with pytest.raises(ValueError):
        build(-0.1)


def test_build_is_compatible_with_arrhenius(build):
    p = cs.SymmetryParams(A=-1.0, kappa=1.0)
    assert cs.check_compatible(build, cs.Arrhenius(1.0, 1.0), p, np.linspace(0.05, 5.0, 32)) <= 1e-9


def test_splice_failure_is_reported():
    with pytest.raises(dsolve.SpliceError):
        dsolve.build_diffusivity(R0=1.0, tol=1e-30)


# ------------------------------------------------------------ series

def test_series_against_oracle_deep_in_range():
    s = dsolve.q_coefficients(1.0, -1, 10, 10)
    seed = dsolve.q_coefficients(1.0, -1, 1, 1)
    oracle = dsolve.ode_oracle_u(cs.Arrhenius(1.0, 1.0), -1.0, 1.0, 0.08, (0.02, seed(0.02)))
    assert s(0.08) == pytest.approx(oracle, abs=1e-13)


def test_series_derivative_and_vectorisation():
    s = dsolve.q_coefficients(1.0, -1, 10, 10)
    t = np.array([0.03, 0.06, 0.1])
    h = 1e-7
    fd = (s(t + h) - s(t - h)) / (2 * h)
    np.testing.assert_allclose(s.derivative(t), fd, rtol=1e-7)
    assert s(0.06) == pytest.approx(s.value_and_error(0.06)[0], rel=1e-15)
    with pytest.raises(ValueError):
        s(np.array([0.1, 0.0]))


def test_series_error_estimate_grows_with_theta():
    s = dsolve.q_coefficients(1.0, -1, 10, 10)
    errs = [s.value_and_error(t)[1] for t in (0.05, 0.1, 0.2)]
    assert errs[0] < errs[1] < errs[2]
    with pytest.raises(dsolve.SeriesRangeError):
        dsolve.u_series_small_theta(s, 0.5, tol=1e-14)


def test_q_table_exact_and_float_agree():
    a = dsolve.q_coefficients(1.0, -1, 6, 6, exact=True)
    b = dsolve.q_coefficients(1.0, -1, 6, 6, exact=False)
    np.testing.assert_allclose(a.q, b.q, rtol=1e-12)


def test_q_table_validation():
    with pytest.raises(ValueError):
        dsolve.q_coefficients(1.0, 2, 5, 5)
    with pytest.raises(ValueError):
        dsolve.q_coefficients(0.0, -1, 5, 5)
    with pytest.raises(ValueError):
        dsolve.q_coefficients(1.0, -1, 5, 5, j_variant="x")


def test_open_questions_resolve():
    rep = dsolve.resolve_open_questions()
    assert rep["chosen"] == {"j": "m", "den": "theta0"}
    assert rep["j"]["m"]["pass"]
    assert rep["den"]["theta0"]["pass"]


# ------------------------------------------------------------ Taylor pieces

@pytest.mark.parametrize("k", [1, 2, 5, 12])
def test_rho_recurrence_matches_hypergeometric(k):
    rho = dsolve.rho_coefficients(0.5, 1.0, 12)
    assert rho[k] == pytest.approx(dsolve.rho_hypergeometric(0.5, 1.0, k), rel=1e-11)


def test_taylor_segment_validation():
    with pytest.raises(ValueError):
        dsolve.u_taylor_segment(0.0, 1.0, 10, 1.0, -1)
    with pytest.raises(ValueError):
        dsolve.u_taylor_segment(0.5, 1.0, 10, 1.0, -1, den_variant="x")


# ------------------------------------------------------------ contraction

def test_contraction_ratios():
    it = dsolve.contraction_iterates(1.0, 6)
    diffs = [np.max(np.abs(it[k + 1].values - it[k].values)) for k in range(6)]
    ratios = [diffs[k + 1] / diffs[k] for k in range(5)]
    assert all(q <= 1 / 1.086 for q in ratios)


def test_first_iterate_closed_form():
    it = dsolve.contraction_iterates(1.0, 1)
    th = np.array([0.2, 1.0, 5.0])
    np.testing.assert_allclose(it[1](th), dsolve.d1_closed(1.0, th), rtol=1e-8)


def test_second_iterate_closed_form():
    it = dsolve.contraction_iterates(1.0, 2)
    th = np.array([0.3, 1.0, 4.0])
    np.testing.assert_allclose(it[2](th), dsolve.d2_closed(1.0, th), rtol=1e-7)


def test_contraction_threshold():
    thr = (3 - math.sqrt(5)) * math.e / 2
    assert dsolve.CONTRACTION_THRESHOLD == pytest.approx(1.0382912674701440747, rel=1e-15)
    assert dsolve.contraction_factor_bound(thr * (1 - 1e-7)) is not None
    assert dsolve.contraction_factor_bound(thr * (1 + 1e-7)) is None
    assert dsolve.contraction_factor_bound(1.0) == pytest.approx(1 / (math.e - 2 + 1 / math.e))
    with pytest.raises(ValueError):
        dsolve.contraction_factor_bound(-1.0)


def test_dm_bound_and_stationary_curve():
    assert dsolve.dm_bound(1.0) == pytest.approx(1.5413411329464508, rel=1e-15)
    assert dsolve.stationary_curve(1.0, 0.5) == pytest.approx(1 + 4 * math.exp(-2))


def test_nondimensionalize():
    s = dsolve.nondimensionalize(-2.0, 0.5, 3.0, 12.0, r_phys=[2.0], t_phys=[1.0], theta_phys=[6.0])
    assert s.D0 == pytest.approx(8.0)
    assert s.R0 == pytest.approx(2.0)
    np.testing.assert_allclose([s.r[0], s.t[0], s.theta[0]], [1.0, 2.0, 2.0])
    with pytest.raises(ValueError):
        dsolve.nondimensionalize(1.0, 1.0, 1.0, 1.0)


def test_physical_diffusivity_scaling(build):
    d = dsolve.PhysicalDiffusivity(build, D0=2.0, B=3.0)
    assert d(3.0) == pytest.approx(2.0 * build(1.0), rel=1e-14)
    assert d.integral(3.0) == pytest.approx(6.0 * build.integral(1.0), rel=1e-14)
