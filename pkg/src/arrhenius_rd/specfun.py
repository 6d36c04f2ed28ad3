"""Special functions used by the closed forms and the series.

Ei and E1 are evaluated by our own series / asymptotic / continued-fraction
kernels (see :mod:`arrhenius_rd.kernels`); ``1F1(a, 2; x)`` and the Bessel
zeros are computed here.  The Bessel and Airy values themselves come from
``scipy.special`` behind domain checks.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from . import kernels

EULER_GAMMA = kernels.EULER_GAMMA


class DomainError(ValueError):
    pass


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(values, scalar):
    return float(values.reshape(())) if scalar else values


def exp_integral_ei(x):
    """Ei(x) for x > 0.

    Convergent series gamma + ln x + sum x^n/(n n!) up to
    ``kernels.EI_SERIES_MAX`` and the optimally truncated asymptotic
    expansion (e^x/x) sum n!/x^n beyond it.
    """
    arr, scalar = _as_array(x)
    flat = arr.ravel()
    if np.any(~(flat > 0)):
        raise DomainError("Ei is only evaluated for x > 0")
    with np.errstate(over="ignore"):
        vals = kernels.ei_scaled(flat) * np.exp(flat) / flat
    return _out(vals.reshape(arr.shape), scalar)


def ei_scaled(x):
    """x e^{-x} Ei(x); finite for every x > 0."""
    arr, scalar = _as_array(x)
    if np.any(~(arr > 0)):
        raise DomainError("Ei is only evaluated for x > 0")
    return _out(kernels.ei_scaled(arr.ravel()).reshape(arr.shape), scalar)


def ei_series(x, n_terms=400):
    """Ei(x) from the power series alone (diagnostics)."""
    term, total = 1.0, 0.0
    for n in range(1, n_terms):
        term *= x / n
        total += term / n
    return EULER_GAMMA + math.log(x) + total


def ei_asymptotic(x):
    """Ei(x) from the asymptotic series alone, with optimal truncation.

    Returns ``(value, error)`` where ``error`` is the smallest term times
    e^x/x, i.e. the usual bar for a superasymptotic sum.
    """
    total, term, n = 1.0, 1.0, 1
    while True:
        nxt = term * n / x
        if nxt >= term:
            break
        term = nxt
        total += term
        n += 1
    scale = math.exp(x) / x
    return scale * total, scale * term


def exp_integral_e1(x):
    """E1(x) = -Ei(-x) for x > 0."""
    arr, scalar = _as_array(x)
    if np.any(~(arr > 0)):
        raise DomainError("E1 is only evaluated for x > 0")
    return _out(kernels.e1(arr.ravel()).reshape(arr.shape), scalar)


def e1_scaled(x):
    """e^x E1(x) for x > 0 (no underflow for large x)."""
    arr, scalar = _as_array(x)
    if np.any(~(arr > 0)):
        raise DomainError("E1 is only evaluated for x > 0")
    return _out(kernels.e1_scaled(arr.ravel()).reshape(arr.shape), scalar)


# ----------------------------------------------------------------- Bessel

def _spherical_j0(x):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(np.abs(x) < 1e-4, 1.0 - x * x / 6.0 + x ** 4 / 120.0, np.sin(x) / np.where(x == 0, 1.0, x))
    return out


def _spherical_j0_prime(x):
    # d/dx sin(x)/x = -j1(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        safe = np.where(x == 0, 1.0, x)
        # closed form cancels like eps/x^2 for small x; series below 0.1
        series = -x / 3.0 + x ** 3 / 30.0 - x ** 5 / 840.0 + x ** 7 / 45360.0
        out = np.where(np.abs(x) < 0.1, series, (x * np.cos(x) - np.sin(x)) / (safe * safe))
    return out


_KINDS = {
    "J0": sc.j0,
    "J1": sc.j1,
    "spherical_j0": _spherical_j0,
    "K0": sc.k0,
    "K1": sc.k1,
}


def bessel_family(kind, x):
    """One of J0, J1, spherical_j0, K0, K1 at x >= 0 (x > 0 for K)."""
    if kind not in _KINDS:
        raise ValueError(f"unknown Bessel kind {kind!r}")
    arr, scalar = _as_array(x)
    if kind.startswith("K"):
        if np.any(~(arr > 0)):
            raise DomainError(f"{kind} requires x > 0")
    elif np.any(arr < 0):
        raise DomainError(f"{kind} requires x >= 0")
    return _out(np.asarray(_KINDS[kind](arr), dtype=float), scalar)


def spherical_j0_prime(x):
    arr, scalar = _as_array(x)
    return _out(_spherical_j0_prime(arr), scalar)


def bessel_jn(n, x):
    return sc.jv(n, x)


def bessel_jn_prime(n, x):
    return sc.jvp(n, x)


# ------------------------------------------------------------------- Airy

@dataclass(frozen=True)
class AiryPair:
    ai: float
    bi: float
    ai_prime: float
    bi_prime: float

    @property
    def wronskian(self):
        return self.ai * self.bi_prime - self.ai_prime * self.bi


def airy_pair(x):
    if abs(x) > 50:
        raise DomainError("airy_pair is supported on |x| <= 50")
    ai, aip, bi, bip = sc.airy(float(x))
    return AiryPair(float(ai), float(bi), float(aip), float(bip))


def airy(x):
    """Vectorised (Ai, Ai', Bi, Bi')."""
    return sc.airy(np.asarray(x, dtype=float))


# ------------------------------------------------------------ 1F1(a, 2; x)

def hyp1f1_b2(a, x):
    """1F1(a, 2; x) for a positive integer ``a``.

    For x >= 0 every term of the defining series is positive and it is summed
    directly.  For x < 0 the series alternates with terms as large as
    e^{2 sqrt(a|x|)}, so Kummer's transformation is applied first:
    1F1(a, 2; x) = e^x L_{a-2}^{(1)}(-x) / (a - 1), with the Laguerre
    polynomial from its three-term recurrence.
    """
    a = int(a)
    if a < 1:
        raise DomainError("a must be a positive integer")
    x = float(x)
    if x == 0.0:
        return 1.0
    if a == 1:
        return math.expm1(x) / x
    if x > 0:
        return _hyp1f1_b2_series(a, x)
    return math.exp(x) * _laguerre1(a - 2, -x) / (a - 1)


def _hyp1f1_b2_series(a, x, max_terms=100000):
    term, total = 1.0, 1.0
    k = 0
    while k < max_terms:
        term *= (a + k) * x / ((2 + k) * (k + 1))
        total += term
        k += 1
        # once (a+k)x/((2+k)(k+1)) < 1/2 the tail is below twice the last term
        if abs(term) < 1e-17 * abs(total) and (a + k) * abs(x) < 0.5 * (2 + k) * (k + 1):
            return total
    raise ArithmeticError("1F1 series did not converge")


def hyp1f1_b2_direct(a, x, n_terms):
    """Plain term-by-term partial sum with ``n_terms`` terms (oracle use)."""
    term, total = 1.0, 1.0
    for k in range(n_terms - 1):
        term *= (a + k) * x / ((2 + k) * (k + 1))
        total += term
    return total


def _laguerre1(n, y):
    # generalized Laguerre L_n^{(1)}(y)
    if n == 0:
        return 1.0
    prev, cur = 1.0, 2.0 - y
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 2 - y) * cur - (k + 1) * prev) / (k + 1)
    return cur


# ----------------------------------------------------------- Bessel zeros

@dataclass(frozen=True)
class BesselZero:
    order: int
    index: int
    value: float


def bessel_zero(n, m):
    """m-th positive zero of J_n by bracketing, bisection and Newton polish."""
    n, m = int(n), int(m)
    if n < 0 or m < 1:
        raise DomainError("need n >= 0 and m >= 1")
    step = 0.25
    x = max(n, 1e-3)
    f_prev = sc.jv(n, x)
    found = 0
    while True:
        x_next = x + step
        f_next = sc.jv(n, x_next)
        if f_prev == 0.0 or f_prev * f_next < 0:
            found += 1
            if found == m:
                break
        x, f_prev = x_next, f_next
    lo, hi = x, x_next
    f_lo = sc.jv(n, lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        f_mid = sc.jv(n, mid)
        if f_lo * f_mid <= 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo < 1e-9:
            break
    root = 0.5 * (lo + hi)
    for _ in range(5):
        root -= sc.jv(n, root) / sc.jvp(n, root)
    return BesselZero(n, m, float(root))
