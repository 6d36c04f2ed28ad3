import json
import math

import numpy as np
import pytest

from arrhenius_rd import construct as cs
from arrhenius_rd import scenario as scn
from arrhenius_rd import spatial

DOC = {"schema": scn.SCENARIO_SCHEMA, "version": scn.SCENARIO_VERSION}


@pytest.fixture(scope="module")
def presets():
    return scn.all_presets()


def test_every_preset_assembles(presets):
    assert len(presets) == 11
    for s in presets:
        sol = scn.assemble(s)
        assert sol.meta["compatibility"] <= 1e-9
        for bc in s.boundaries:
            if bc.kind == "dirichlet_zero":
                assert abs(sol.u(bc.r, 0.3)) < 1e-12


def test_flux_boundaries_hold(presets):
    for s in presets:
        sol = scn.assemble(s)
        for bc in s.boundaries:
            if bc.kind != "flux":
                continue
            f = float(s.hetero.f(bc.r)) if s.hetero.kind != "none" else 1.0
            for t in (0.0, 0.7):
                out = -spatial.SPHERE_AREA[s.dim] * bc.r ** (s.dim - 1) * f * sol.u_r(bc.r, t)
                assert out == pytest.approx(abs(bc.A) * bc.Q * math.exp(bc.A * t), rel=1e-12)


def test_solution_is_separable():
    s = scn.preset(3)
    sol = scn.assemble(s)
    r = np.linspace(0, 1, 7)
    np.testing.assert_allclose(sol.u(r, 1.0), math.exp(s.params.A) * sol.u(r, 0.0), rtol=1e-14)
    np.testing.assert_allclose(sol.flux(r, 0.0), -sol.u_r(r, 0.0))


def test_ex3_theta_below_u_and_gap_shrinks():
    s = scn.preset(3)
    sol = scn.assemble(s)
    r = np.linspace(0, 1, 101)
    gaps = []
    for t in s.times:
        th, u = sol.theta(r, t), sol.u(r, t)
        assert np.all(th <= u + 1e-14)
        gaps.append(np.max(u - th))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_theta_round_trip():
    s = scn.preset(6, "square_2")
    sol = scn.assemble(s)
    r = np.linspace(1.0, 4.0, 9)[:-1]
    th = sol.theta(r, 0.2)
    np.testing.assert_allclose(cs.kirchhoff_u(s.diffusivity, th), sol.u(r, 0.2), rtol=1e-12)


def test_assemble_detects_kappa_mismatch():
    s = scn.preset(4)
    s.params = cs.SymmetryParams(A=s.params.A, kappa=2.0)
    with pytest.raises(cs.CompatibilityError):
        scn.assemble(s)


def test_assemble_detects_broken_pair():
    s = scn.preset(4)
    s.diffusivity = cs.ScaledDiffusivity(s.diffusivity, 1.1)
    with pytest.raises(cs.CompatibilityError):
        scn.assemble(s)
    assert scn.assemble(s, check=False).meta["compatibility"] is None


def test_assemble_rejects_sign_change():
    doc = dict(DOC, explicit={"row": "b", "A": -1.0, "kappa": 1.0, "dim": 1, "domain": [0.0, 3.0]})
    s, _, _ = scn.load_scenario(doc)
    with pytest.raises(spatial.ProfileError):
        scn.assemble(s)


def test_hash_is_stable_and_sensitive():
    a = scn.preset(2).hash
    assert a == scn.preset(2).hash
    assert a != scn.preset(2, overrides={"Q": 2.0}).hash
    assert scn.canonical_hash({"b": 1, "a": 2}) == scn.canonical_hash({"a": 2, "b": 1})


def test_preset_config_validation():
    with pytest.raises(scn.ScenarioError):
        scn.preset(8)
    with pytest.raises(scn.ScenarioError):
        scn.preset(6, "triangle")
    with pytest.raises(scn.ScenarioError):
        scn.preset(3, "square")
    with pytest.raises(scn.ScenarioError):
        scn.preset(1, overrides={"colour": 1})


def test_ex3_times_are_scaled():
    s = scn.preset(3)
    np.testing.assert_allclose(np.array(s.times) * abs(s.params.A), [-1.5, 0.0, 1.5, 2.5])


# ------------------------------------------------------------ scenario files

def test_load_scenario_from_text_and_path(tmp_path):
    doc = dict(DOC, preset=2, times=[0.0, 0.5], grid={"nr": 50, "nt": 3})
    s1, _, h1 = scn.load_scenario(json.dumps(doc))
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    s2, _, h2 = scn.load_scenario(str(path))
    assert h1 == h2 and s1.hash == s2.hash
    assert s1.times == (0.0, 0.5)


@pytest.mark.parametrize("patch,msg", [
    ({"schema": "x"}, "schema"),
    ({"version": 2}, "version"),
    ({"colour": "red"}, "unknown"),
    ({"explicit": {"row": "a", "A": -1, "kappa": 1, "dim": 1, "domain": [0, 1]}}, "exactly one"),
    ({"domain": [0.0, 5.0]}, "inside"),
    ({"outputs": ["pressure"]}, "outputs"),
    ({"grid": {"nx": 3}}, "grid"),
])
def test_load_scenario_rejects(patch, msg):
    doc = dict(DOC, preset=2)
    doc.update(patch)
    with pytest.raises(scn.ScenarioError, match=msg):
        scn.load_scenario(doc)


def test_explicit_rows():
    for row, dom in (("a", [0.0, 1.0]), ("b", [0.0, 1.0]), ("d", [0.0, 1.0])):
        doc = dict(DOC, explicit={"row": row, "A": -1.0, "kappa": 1.0, "dim": 2, "domain": dom,
                                  "row_params": {"m": 0.5} if row == "a" else None})
        s, _, _ = scn.load_scenario(doc)
        assert scn.assemble(s).meta["compatibility"] <= 1e-9
    with pytest.raises(scn.ScenarioError):
        scn.load_scenario(dict(DOC, explicit={"row": "c", "A": -1.0, "kappa": 1.0, "dim": 2, "domain": [0, 1]}))


# ------------------------------------------------------------ isotherms

@pytest.mark.parametrize("pid", [1, 2])
def test_isotherm_closed_form_matches_bracketed(pid):
    sol = scn.assemble(scn.preset(pid))
    r = np.linspace(0.12, 0.95, 5)
    for rr in r:
        th = float(sol.theta(rr, 0.3))
        a = scn.isotherm_radius(sol, th, 0.3)
        b = scn.isotherm_radius_bracketed(sol, th, 0.3)
        assert a == pytest.approx(rr, rel=1e-9)
        assert b == pytest.approx(rr, rel=1e-9)


def test_isotherm_out_of_range():
    sol = scn.assemble(scn.preset(2))
    hot = float(sol.theta(0.1, 0.0)) * 1.5
    assert scn.isotherm_radius(sol, hot, 0.0) is None
    assert scn.isotherm_radius(sol, -1.0, 0.0) is None
