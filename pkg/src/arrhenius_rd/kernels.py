"""Hot numeric kernels.

Every kernel exists twice: an explicit-loop version compiled with numba and
a vectorised numpy version.  The public wrappers at the bottom dispatch on
:func:`arrhenius_rd._accel.backend`, so ``ARRHENIUS_RD_NUMBA=0`` runs the
whole package without numba.  ``tests/test_kernels.py`` checks that both
paths agree and ``benchmarks/bench_kernels.py`` times them against each other.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit

EULER_GAMMA = 0.57721566490153286061

# Ei(x): power series below this, optimally truncated asymptotic series above.
# Picked by scanning x in [20, 60] against a quadrature reference: the series
# keeps ~1e-15 relative accuracy up to x ~ 45 (no cancellation for x > 0),
# while the asymptotic remainder ~ sqrt(2 pi / x) e^-x only drops below 1e-16
# past x ~ 37.
EI_SERIES_MAX = 40.0
# E1(x): power series below this, continued fraction above.
E1_SERIES_MAX = 1.0


# ---------------------------------------------------------------- Ei, E1

@njit
def _ei_scaled_scalar(x):
    # x e^{-x} Ei(x), x > 0
    if x <= EI_SERIES_MAX:
        term = 1.0
        total = 0.0
        n = 1
        while True:
            term *= x / n
            add = term / n
            total += add
            if add < 1e-17 * total or n > 500:
                break
            n += 1
        return x * math.exp(-x) * (EULER_GAMMA + math.log(x) + total)
    # asymptotic: sum n!/x^n, stopped at the smallest term
    total = 1.0
    term = 1.0
    n = 1
    while n < 500:
        nxt = term * n / x
        if nxt >= term:
            break
        term = nxt
        total += term
        if term < 1e-17 * total:
            break
        n += 1
    return total


@njit
def _e1_scalar(x):
    if x <= E1_SERIES_MAX:
        total = 0.0
        term = 1.0
        n = 1
        while n < 200:
            term *= -x / n
            add = term / n
            total += add
            if abs(add) < 1e-17 * abs(total):
                break
            n += 1
        return -EULER_GAMMA - math.log(x) - total
    return math.exp(-x) * _e1_scaled_cf(x)


@njit
def _e1_scaled_cf(x):
    # e^{x} E1(x) by modified Lentz on the classical continued fraction
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


@njit
def _ei_scaled_loop(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = _ei_scaled_scalar(x[i])
    return out


@njit
def _e1_loop(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = _e1_scalar(x[i])
    return out


@njit
def _e1_scaled_loop(x):
    out = np.empty_like(x)
    for i in range(x.size):
        xi = x[i]
        if xi <= E1_SERIES_MAX:
            out[i] = math.exp(xi) * _e1_scalar(xi)
        else:
            out[i] = _e1_scaled_cf(xi)
    return out


def _ei_scaled_numpy(x):
    out = np.empty_like(x)
    lo = x <= EI_SERIES_MAX
    if lo.any():
        xs = x[lo]
        term = np.ones_like(xs)
        total = np.zeros_like(xs)
        for n in range(1, 200):
            term = term * xs / n
            total += term / n
        out[lo] = xs * np.exp(-xs) * (EULER_GAMMA + np.log(xs) + total)
    hi = ~lo
    if hi.any():
        xs = x[hi]
        total = np.ones_like(xs)
        term = np.ones_like(xs)
        live = np.ones(xs.shape, dtype=bool)
        for n in range(1, 200):
            nxt = term * n / xs
            live &= nxt < term
            if not live.any():
                break
            term = np.where(live, nxt, term)
            total += np.where(live, nxt, 0.0)
        out[hi] = total
    return out


def _e1_scaled_numpy(x):
    out = np.empty_like(x)
    lo = x <= E1_SERIES_MAX
    if lo.any():
        xs = x[lo]
        term = np.ones_like(xs)
        total = np.zeros_like(xs)
        for n in range(1, 60):
            term = term * (-xs) / n
            total += term / n
        out[lo] = np.exp(xs) * (-EULER_GAMMA - np.log(xs) - total)
    hi = ~lo
    if hi.any():
        xs = x[hi]
        tiny = 1e-300
        b = xs + 1.0
        c = np.full_like(xs, 1.0 / tiny)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, 500):
            b = b + 2.0
            d = 1.0 / (-float(i * i) * d + b)
            c = b - i * i / c
            delta = c * d
            h *= delta
            if np.all(np.abs(delta - 1.0) < 1e-16):
                break
        out[hi] = h
    return out


# ------------------------------------------------------------- q-table

@njit
def _q_fill_loop(q, sign_a, R0, j_is_m):
    r_max = q.shape[0] - 1
    m_max = q.shape[1] - 1
    for r in range(r_max):
        for m in range(m_max):
            conv = 0.0
            for s in range(r + 1):
                for l in range(m + 1):
                    inner = (s + 1) * q[s, l]
                    if l >= 1:
                        inner -= (s - l) * q[s, l - 1]
                    conv += q[r - s, m - l] * inner
            j = m if j_is_m else 0
            bracket = (sign_a * (r - m) / R0) * q[r + 1, m] + (r - j - 1) * q[r, m] \
                - (r + 1) * q[r, m + 1] + conv
            q[r + 1, m + 1] = sign_a * R0 / (r + 2) * bracket
    return q


def _q_fill_numpy(q, sign_a, R0, j_is_m):
    r_max = q.shape[0] - 1
    m_max = q.shape[1] - 1
    for r in range(r_max):
        s = np.arange(r + 1)
        for m in range(m_max):
            l = np.arange(m + 1)
            qs = q[: r + 1, : m + 1]
            shifted = np.zeros_like(qs)
            shifted[:, 1:] = q[: r + 1, :m]
            inner = (s[:, None] + 1) * qs - (s[:, None] - l[None, :]) * shifted
            partner = q[r::-1, m::-1][:, : m + 1]
            conv = float(np.sum(partner * inner))
            j = m if j_is_m else 0
            bracket = (sign_a * (r - m) / R0) * q[r + 1, m] + (r - j - 1) * q[r, m] \
                - (r + 1) * q[r, m + 1] + conv
            q[r + 1, m + 1] = sign_a * R0 / (r + 2) * bracket
    return q


# ------------------------------------------------------ Taylor recurrence

@njit
def _taylor_loop(lam0, rho, sign_a, theta0, den, n_terms):
    lam = np.zeros(n_terms + 1)
    lam[0] = lam0
    for i in range(n_terms):
        acc = 0.0
        for n in range(1, i + 1):
            acc += (i - n + 1) * lam[i - n + 1] * (lam[n] - rho[n])
        lam[i + 1] = (sign_a * theta0 * lam[i] - acc) / ((i + 1) * den)
    return lam


def _taylor_numpy(lam0, rho, sign_a, theta0, den, n_terms):
    lam = np.zeros(n_terms + 1)
    lam[0] = lam0
    for i in range(n_terms):
        if i:
            n = np.arange(1, i + 1)
            acc = float(np.dot((i - n + 1) * lam[i - n + 1], lam[1: i + 1] - rho[1: i + 1]))
        else:
            acc = 0.0
        lam[i + 1] = (sign_a * theta0 * lam[i] - acc) / ((i + 1) * den)
    return lam


# --------------------------------------------------------------- Horner

@njit
def _horner_loop(coeffs, y):
    val = np.empty_like(y)
    der = np.empty_like(y)
    n = coeffs.size
    for k in range(y.size):
        yk = y[k]
        p = coeffs[n - 1]
        dp = 0.0
        for i in range(n - 2, -1, -1):
            dp = dp * yk + p
            p = p * yk + coeffs[i]
        val[k] = p
        der[k] = dp
    return val, der


def _horner_numpy(coeffs, y):
    p = np.full_like(y, coeffs[-1])
    dp = np.zeros_like(y)
    for c in coeffs[-2::-1]:
        dp = dp * y + p
        p = p * y + c
    return p, dp


# ---------------------------------------------------- cumulative integral

@njit
def _cumint_loop(g, h):
    n = g.size
    dg = np.empty(n)
    dg[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
    dg[n - 1] = (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * h)
    for i in range(1, n - 1):
        dg[i] = (g[i + 1] - g[i - 1]) / (2.0 * h)
    out = np.empty(n)
    out[0] = 0.0
    acc = 0.0
    for i in range(1, n):
        acc += 0.5 * h * (g[i] + g[i - 1])
        out[i] = acc - h * h / 12.0 * (dg[i] - dg[0])
    return out


def _cumint_numpy(g, h):
    dg = np.gradient(g, h, edge_order=2)
    out = np.zeros_like(g)
    out[1:] = np.cumsum(0.5 * h * (g[1:] + g[:-1]))
    return out - h * h / 12.0 * (dg - dg[0])


# ------------------------------------------- conservative radial divergence

@njit
def _divergence_loop(r, weight, q, dim):
    # (1/r^{d-1}) d/dr (r^{d-1} w dq/dr) on interior nodes, faces at midpoints
    n = r.size
    out = np.zeros(n)
    for i in range(1, n - 1):
        rp = 0.5 * (r[i] + r[i + 1])
        rm = 0.5 * (r[i] + r[i - 1])
        fp = rp ** (dim - 1) * weight[i] * (q[i + 1] - q[i]) / (r[i + 1] - r[i])
        fm = rm ** (dim - 1) * weight[i - 1] * (q[i] - q[i - 1]) / (r[i] - r[i - 1])
        out[i] = (fp - fm) / (0.5 * (r[i + 1] - r[i - 1])) / r[i] ** (dim - 1)
    return out


def _divergence_numpy(r, weight, q, dim):
    out = np.zeros_like(q)
    rf = 0.5 * (r[1:] + r[:-1])
    flux = rf ** (dim - 1) * weight * np.diff(q) / np.diff(r)
    out[1:-1] = np.diff(flux) / (0.5 * (r[2:] - r[:-2])) / r[1:-1] ** (dim - 1)
    return out


# ================================================================ dispatch

def _use_numba():
    return _accel.backend() == "numba"


def ei_scaled(x):
    """x e^{-x} Ei(x) for an array of positive x."""
    x = np.ascontiguousarray(x, dtype=float)
    return _ei_scaled_loop(x) if _use_numba() else _ei_scaled_numpy(x)


def e1(x):
    x = np.ascontiguousarray(x, dtype=float)
    if _use_numba():
        return _e1_loop(x)
    return np.exp(-x) * _e1_scaled_numpy(x)


def e1_scaled(x):
    """e^{x} E1(x) for an array of positive x."""
    x = np.ascontiguousarray(x, dtype=float)
    return _e1_scaled_loop(x) if _use_numba() else _e1_scaled_numpy(x)


def q_fill(q, sign_a, R0, j_is_m=True):
    """Complete a q-table whose row 0 and column 0 are already set."""
    q = np.ascontiguousarray(q, dtype=float)
    if _use_numba():
        return _q_fill_loop(q, float(sign_a), float(R0), bool(j_is_m))
    return _q_fill_numpy(q, float(sign_a), float(R0), bool(j_is_m))


def taylor_coefficients(lam0, rho, sign_a, theta0, den, n_terms):
    rho = np.ascontiguousarray(rho, dtype=float)
    args = (float(lam0), rho, float(sign_a), float(theta0), float(den), int(n_terms))
    return _taylor_loop(*args) if _use_numba() else _taylor_numpy(*args)


def horner(coeffs, y):
    """Value and first derivative of sum c_n y^n."""
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    return _horner_loop(coeffs, y) if _use_numba() else _horner_numpy(coeffs, y)


def cumulative_integral(g, h):
    """Running integral of samples ``g`` on a uniform grid of spacing ``h``.

    Trapezoid rule with the Euler-Maclaurin end correction, O(h^4).
    """
    g = np.ascontiguousarray(g, dtype=float)
    if g.size < 3:
        raise ValueError("need at least 3 samples")
    return _cumint_loop(g, float(h)) if _use_numba() else _cumint_numpy(g, float(h))


def radial_divergence(r, face_weight, q, dim):
    """Second-order conservative (1/r^{d-1})(r^{d-1} w q_r)_r; zero on end nodes.

    ``face_weight`` holds w at the n-1 cell faces.
    """
    r = np.ascontiguousarray(r, dtype=float)
    w = np.ascontiguousarray(face_weight, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    return _divergence_loop(r, w, q, int(dim)) if _use_numba() else _divergence_numpy(r, w, q, int(dim))
