import math

import numpy as np
import pytest

from arrhenius_rd import spatial, specfun
from arrhenius_rd.spatial import ProfileError

LAM01 = 2.4048255576957727686


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("kappa", [2.0, 0.0, -1.5])
def test_radial_profiles_solve_the_ode(dim, kappa):
    lo = 0.2
    prof = spatial.phi_radial(kappa, dim, r_min=lo, r_max=lo + 1.0)
    assert prof.max_relative_residual() < 1e-8


def test_regular_profiles_at_origin():
    for dim, fam in ((1, "cos"), (2, "J0"), (3, "j0")):
        prof = spatial.phi_radial(1.0, dim)
        assert prof.family == fam
        assert prof(0.0) == pytest.approx(1.0)
        assert prof.derivative(0.0) == 0.0
        assert abs(prof(spatial.first_zero(dim))) < 1e-14


def test_decaying_extensions_are_marked():
    assert spatial.phi_radial(-1.0, 1).extension
    assert not spatial.phi_radial(-1.0, 2).extension
    assert spatial.phi_radial(-1.0, 3).extension


def test_profile_validation():
    with pytest.raises(ProfileError):
        spatial.phi_radial(1.0, 4)
    with pytest.raises(ProfileError):
        spatial.phi_radial(4.0, 2, K=3.0)


def test_fit_dirichlet():
    assert spatial.fit_dirichlet(2, 2.0) == pytest.approx(LAM01 / 2.0)
    assert spatial.fit_dirichlet(3, 1.0) == pytest.approx(math.pi)
    with pytest.raises(ProfileError):
        spatial.fit_dirichlet(2, 0.0)


def test_fit_biot_monotone_and_limit():
    Ks = [spatial.fit_biot(2, 1.0, bi).K for bi in (0.1, 1.0, 10.0, 100.0)]
    assert all(0 < k < LAM01 for k in Ks)
    assert all(b > a for a, b in zip(Ks, Ks[1:]))
    assert Ks[-1] == pytest.approx(LAM01, rel=0.02)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_fit_biot_satisfies_the_condition(dim):
    fit = spatial.fit_biot(dim, 1.5, 2.0, D0=0.5)
    prof = spatial.phi_radial(fit.K ** 2, dim)
    assert -prof.derivative(1.5) / prof(1.5) == pytest.approx(2.0, rel=1e-10)
    assert fit.A == pytest.approx(-fit.K ** 2 * 0.5)


def test_fit_flux():
    A, Q = -2.0, 0.7
    for dim in (2, 3):
        prof = spatial.fit_flux(dim, 0.1, 1.0, Q, A)
        assert abs(prof(1.0)) < 1e-15
        out = -spatial.SPHERE_AREA[dim] * 0.1 ** (dim - 1) * prof.derivative(0.1)
        assert out == pytest.approx(abs(A) * Q, rel=1e-13)
    with pytest.raises(ProfileError):
        spatial.fit_flux(2, 1.0, 0.5, Q, A)


def test_euler_shape():
    prof = spatial.hetero_phi("square", 0.36, {"r0": 1.0, "r1": 4.0, "K": 0.6})
    r = np.array([1.5, 2.0, 3.0])
    shape = r ** -0.2 - 4.0 ** 1.6 * r ** -1.8
    np.testing.assert_allclose(prof(r) / prof(2.0), shape / shape[1], rtol=1e-13)
    assert abs(prof(4.0)) < 1e-14


@pytest.mark.parametrize("f_kind,kappa,K", [("square", 0.36, 0.6), ("square", 4.0, 2.0), ("square", -1.0, 1.0),
                                            ("inverse_r", 0.36, 0.6), ("inverse_r", -1.0, 1.0),
                                            ("square", 0.0, None), ("inverse_r", 0.0, None)])
def test_hetero_profiles_solve_the_ode(f_kind, kappa, K):
    params = {"r0": 1.0, "r1": 4.0}
    if K is not None:
        params["K"] = K
    prof = spatial.hetero_phi(f_kind, kappa, params)
    assert prof.max_relative_residual() < 1e-7


def _double_root_gap(eps, r1=4.0):
    # profiles normalized by Phi(r0) on either side of K r0 = 1, against the
    # degenerate limit (1/r) ln(r1/r)
    r = np.array([1.5, 2.0, 3.0])
    lim = np.log(r1 / r) / r / math.log(r1)
    out = []
    for k in (1 - eps, 1 + eps):
        prof = spatial.hetero_phi("square", k * k, {"r0": 1.0, "r1": r1, "K": k})
        out.append(np.max(np.abs(prof(r) / prof(1.0) - lim)))
    return max(out)


def test_euler_branches_converge_linearly_to_the_double_root():
    g3, g4 = _double_root_gap(1e-3), _double_root_gap(1e-4)
    assert g3 / g4 == pytest.approx(10.0, rel=0.05)
    assert g4 < 1e-4
    with pytest.raises(ProfileError):
        spatial.hetero_phi("square", 1.0, {"r0": 1.0, "r1": 4.0, "K": 1.0})


def test_euler_branches_within_1e4_at_offset_1e3():
    assert _double_root_gap(1e-3) <= 1e-4


def test_custom_laplace_against_closed_form():
    params = {"r0": 1.0, "r1": 4.0, "fn": lambda r: (r / 1.0) ** 2}
    custom = spatial.hetero_phi("custom", 0.0, params)
    closed = spatial.hetero_phi("square", 0.0, {"r0": 1.0, "r1": 4.0})
    r = np.array([1.2, 2.0, 3.5])
    np.testing.assert_allclose(custom(r), closed(r), rtol=1e-11)
    np.testing.assert_allclose(spatial.hetero_laplace_quadrature(lambda s: s ** 2, r, 4.0), closed(r), rtol=1e-11)


def test_airy_profile_vanishes_at_r1():
    prof = spatial.hetero_phi("inverse_r", 0.36, {"r0": 1.0, "r1": 4.0, "K": 0.6})
    assert abs(prof(4.0)) < 1e-14 * abs(prof(1.0))
    ai = specfun.airy_pair(-(0.6 ** (2 / 3)) * 4.0)
    assert prof.coefficients["c1"] == pytest.approx(ai.bi)


def test_boundary_spec_serialises():
    bc = spatial.BoundarySpec("flux", 2, r=0.1, Q=1.0, A=-1.0)
    assert bc.to_dict() == {"kind": "flux", "dim": 2, "r": 0.1, "Q": 1.0, "A": -1.0}
