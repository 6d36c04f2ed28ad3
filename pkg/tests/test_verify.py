import math

import numpy as np
import pytest

from arrhenius_rd import construct as cs
from arrhenius_rd import scenario as scn
from arrhenius_rd import verify as vf

LAM01 = 2.4048255576957727686
LAM11 = 3.8317059702075123156


def test_grid_validation():
    with pytest.raises(vf.GridError):
        vf.Grid(np.linspace(0, 1, 3), np.linspace(0, 1, 5), 2)
    with pytest.raises(vf.GridError):
        vf.Grid(np.array([0.0, 0.5, 0.4, 1.0]), np.linspace(0, 1, 5), 2)
    with pytest.raises(vf.GridError):
        vf.radial_nodes(0.0, 1.0, 10, "geometric")
    with pytest.raises(vf.GridError):
        vf.Grid(np.linspace(0, 1, 10), np.linspace(0, 1, 5), 2).coarsened()
    g = vf.Grid(np.linspace(0, 1, 9), np.linspace(0, 1, 5), 2)
    assert g.coarsened().r.size == 5


def test_preset3_residual_passes():
    s = scn.preset(3)
    sol = scn.assemble(s)
    rep = vf.pde_residual(sol, s, vf.grid_for(s, 400, 32))
    assert rep.relative <= 1e-5
    assert rep.order >= 1.8
    assert rep.passed()


def test_corrupted_diffusivity_fails_the_residual():
    s = scn.preset(3)
    s.diffusivity = cs.ScaledDiffusivity(s.diffusivity, 1.1)
    sol = scn.assemble(s, check=False)
    rep = vf.pde_residual(sol, s, vf.grid_for(s, 400, 32))
    assert not rep.passed()
    assert rep.relative > 1e-3


def test_residual_report_rows():
    rep = vf.ResidualReport(2e-6, 1e-6, 0.3, 0.1, 1.0, order=2.0)
    names = [k for k, _ in rep.as_rows()]
    assert names[0] == "max_abs_residual" and "order_estimate" in names
    assert rep.passed() and not rep.passed(tol=1e-6)
    assert not vf.ResidualReport(2e-6, 1e-6, 0.3, 0.1, 1.0, order=1.2).passed()


def test_ex3_oracle_agreement():
    s = scn.preset(3)
    sol = scn.assemble(s)
    err, hist = vf.oracle_agreement(s, sol, nr=401)
    assert err <= 1e-5
    assert np.all(np.diff(hist.t) > 0)


def test_linear_heat_mode_decays_at_the_dirichlet_rate():
    # row a with m = 0 and kappa = -A gives D = 1 and R = 0: plain heat equation
    r1 = 2.0
    lam = (LAM01 / r1) ** 2
    doc = {"schema": scn.SCENARIO_SCHEMA, "version": scn.SCENARIO_VERSION,
           "explicit": {"row": "a", "row_params": {"m": 0.0}, "A": -lam, "kappa": lam, "dim": 2,
                        "domain": [0.0, r1]}}
    s, _, _ = scn.load_scenario(doc)
    sol = scn.assemble(s)
    r = np.linspace(0.0, r1, 201)
    g = vf.Grid(r, np.linspace(0.0, 1.0, 11), 2)
    hist = vf.evolve_nonlinear(s, sol.theta(r, 0.0), g, boundaries=("regular", ("dirichlet", lambda t: 0.0)))
    amp = hist.u[:, 0]
    slope = np.polyfit(hist.t, np.log(amp), 1)[0]
    assert slope == pytest.approx(-lam, rel=1e-4)


def test_evolve_rejects_off_grid_initial_data():
    s = scn.preset(3)
    g = vf.grid_for(s, 50, 5)
    with pytest.raises(vf.GridError):
        vf.evolve_nonlinear(s, np.zeros(10), g)


# ------------------------------------------------------------ stability

def test_stability_threshold():
    thr = vf.stability_threshold()
    assert thr == pytest.approx(math.e ** 2 * ((LAM11 / LAM01) ** 2 - 1) / 4, rel=1e-13)
    assert thr == pytest.approx(2.8425, abs=5e-4)


def test_stability_criterion_is_strict():
    thr = vf.stability_threshold()
    # group = R0 r1^2 / (B lam01^2 D0); with r1 = lam01 and B = D0 = 1 it is R0
    at = vf.stability_criterion(thr, LAM01, 1.0, 1.0, dim2_zeros=(LAM01, LAM11))
    assert at.group == pytest.approx(thr, rel=1e-15)
    below = vf.stability_criterion(1.0, LAM01, 1.0, 1.0)
    assert below.passed and below.margin > 0
    assert not vf.stability_criterion(5.0, LAM01, 1.0, 1.0).passed
    # r1 = lam01 = 1 makes the group equal R0 bit for bit
    zeros = (1.0, LAM11 / LAM01)
    edge = vf.stability_threshold(*zeros)
    exact = vf.stability_criterion(edge, 1.0, 1.0, 1.0, dim2_zeros=zeros)
    assert exact.margin == 0.0 and not exact.passed
    with pytest.raises(ValueError):
        vf.stability_criterion(0.0, 1.0, 1.0, 1.0)


def test_stability_zero_perturbation():
    tab = vf.stability_experiment(eps=0.0, modes=((1, 1),), nr=16, nphi=8, t_end=0.5, n_out=6)
    assert [w.verdict for w in tab.rows] == ["zero"]


def test_stability_small_grid_decays():
    tab = vf.stability_experiment(eps=1e-3, modes=((1, 1),), nr=32, nphi=16, t_end=2.0, n_out=11)
    row = tab.rows[0]
    assert row.verdict == "pass", row
    assert row.rate < 0 and row.monotone
    assert row.bound_rate == pytest.approx(1.5413411329464508 - (LAM11 / LAM01) ** 2, rel=1e-10)
    assert len(tab.as_rows()[0]) == len(tab.header())


def test_stability_rejects_large_eps():
    with pytest.raises(ValueError):
        vf.stability_experiment(eps=0.5)
