"""Numba and numpy paths of every kernel must agree."""
import math

import numpy as np
import pytest

from arrhenius_rd import _accel, dsolve, kernels


@pytest.fixture
def both():
    saved = _accel.backend()

    def run(fn, *args):
        out = {}
        for name in ("numba", "numpy"):
            _accel.set_backend(name)
            res = fn(*args)
            out[name] = tuple(np.array(x, copy=True) for x in res) if isinstance(res, tuple) else np.array(res)
        return out["numba"], out["numpy"]

    yield run
    _accel.set_backend(saved)


def test_backend_switch_validates():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


def test_ei_scaled_agree(both):
    x = np.geomspace(1e-6, 1e6, 501)
    a, b = both(kernels.ei_scaled, x)
    np.testing.assert_allclose(a, b, rtol=1e-14)


@pytest.mark.parametrize("fn", [kernels.e1, kernels.e1_scaled])
def test_e1_agree(both, fn):
    x = np.geomspace(1e-6, 600, 501)
    a, b = both(fn, x)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=0)


@pytest.mark.parametrize("j_is_m", [True, False])
def test_q_fill_agree(both, j_is_m):
    rows, cols = 12, 12
    table = np.zeros((rows, cols + 1))
    table[0, :] = [(-1) ** m * math.factorial(m) for m in range(cols + 1)]
    table[:, 0] = [1.0 ** r / (r + 1) for r in range(rows)]
    a, b = both(kernels.q_fill, table, -1, 1.0, j_is_m)
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_taylor_agree(both):
    rho = dsolve.rho_coefficients(0.5, 1.0, 60)
    a, b = both(kernels.taylor_coefficients, 0.5558, rho, -1.0, 0.5, 0.5558 - math.exp(-2.0), 60)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_horner_agree(both):
    c = np.random.default_rng(3).normal(size=40)
    y = np.linspace(-0.5, 0.5, 101)
    (va, da), (vb, db) = both(kernels.horner, c, y)
    np.testing.assert_allclose(va, vb, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(da, db, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(va, np.polynomial.polynomial.polyval(y, c), rtol=1e-12, atol=1e-14)


def test_cumulative_integral_agree_and_order(both):
    x = np.linspace(0, 2, 201)
    a, b = both(kernels.cumulative_integral, np.cos(x), x[1] - x[0])
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)
    assert np.max(np.abs(a - np.sin(x))) < 1e-9


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_radial_divergence_agree(both, dim):
    r = np.linspace(0.5, 2.0, 81)
    w = 1 + 0.5 * (0.5 * (r[1:] + r[:-1]))
    q = r ** 3
    a, b = both(kernels.radial_divergence, r, w, q, dim)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-12)
    # (1/r^{d-1})(r^{d-1}(1 + r/2) 3r^2)' for the interior
    exact = (3 * (dim + 1) * r + 1.5 * (dim + 2) * r ** 2)
    assert np.max(np.abs(a[1:-1] - exact[1:-1])) < 5e-3
    assert a[0] == a[-1] == 0.0
