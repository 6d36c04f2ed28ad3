"""Inverse construction: the diffusivity compatible with an Arrhenius rate.

In dimensionless units (|A| = K = B = 1, kappa = 1, A = signA) the Kirchhoff
variable obeys

    u'(theta) = signA * u / (R(theta) - u),     R = R0 exp(-1/theta)

and D = u'.  Three independent routes are provided:

* the fixed-point map D -> Dbar / (Dbar - R/theta) on a log-theta grid,
* the small-theta double series in exp(-1/theta) chained to Taylor
  expansions about regular points (``build_diffusivity``),
* direct adaptive Runge-Kutta integration (``ode_oracle_u``).
"""
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline
from scipy.special import gammaincc, gammaln

from . import kernels, specfun
from .construct import Arrhenius, Diffusivity

# constants quoted by the acceptance tests
CONTRACTION_THRESHOLD = (3.0 - math.sqrt(5.0)) * math.e / 2.0
FORMAT_VERSION = 1


class SeriesRangeError(ValueError):
    pass


class SpliceError(RuntimeError):
    pass


class ContractionError(ValueError):
    pass


# ---------------------------------------------------------- scaling

@dataclass(frozen=True)
class Scaled:
    r: object
    t: object
    theta: object
    R0: float
    D0: float
    u_scale: float
    sup_R_over_theta: float


def nondimensionalize(A, K, B, R0_phys, r_phys=None, t_phys=None, theta_phys=None):
    """Map physical (A < 0, K, B, R0) to the dimensionless frame.

    Length Kr, time |A|t, temperature theta/B, D/D(0) with D(0) = -A/K^2 and
    u/(B D(0)).  The rescaled rate is R0_phys/(|A| B).
    """
    if not A < 0:
        raise ValueError("need A < 0")
    if not K > 0 or not B > 0:
        raise ValueError("need K > 0 and B > 0")
    D0 = -A / K ** 2
    R0 = R0_phys / (abs(A) * B)
    sc = lambda x, f: None if x is None else np.asarray(x, dtype=float) * f
    return Scaled(sc(r_phys, K), sc(t_phys, abs(A)), sc(theta_phys, 1.0 / B), R0, D0, B * D0, R0 / math.e)


def dm_bound(R0):
    """Upper bound 1 + 4 R0/e^2 on the Arrhenius-compatible diffusivity."""
    return 1.0 + 4.0 * R0 / math.e ** 2


def stationary_curve(R0, theta):
    """D at which D'(theta) = 0 may occur: 1 + R0 exp(-1/theta)/theta^2."""
    t = np.asarray(theta, dtype=float)
    return 1.0 + R0 * np.exp(-1.0 / t) / t ** 2


# ---------------------------------------------------------- contraction map

def default_log_grid(theta_lo=1e-3, theta_hi=1e4, n=20001):
    """Uniform in ln(theta), hence geometric in beta = 1/theta."""
    return np.exp(np.linspace(math.log(theta_lo), math.log(theta_hi), n))


class GridDiffusivity(Diffusivity):
    """D sampled on a geometric theta grid, with its running integral.

    Below the first node D is taken constant (the reaction is e^{-1/theta}
    small there); above the last node it is held at the last value.
    """
    kind = "iterate"

    def __init__(self, theta, values, integral_values, stage=None):
        self.theta = np.asarray(theta, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.cum = np.asarray(integral_values, dtype=float)
        self.stage = stage
        s = np.log(self.theta)
        self._D = CubicSpline(s, self.values)
        self._I = CubicSpline(s, self.cum)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        s = np.log(np.clip(t, self.theta[0], self.theta[-1]))
        out = np.where(t <= self.theta[0], self.values[0],
                       np.where(t >= self.theta[-1], self.values[-1], self._D(s)))
        return float(out) if out.ndim == 0 else out

    def integral(self, theta):
        t = np.asarray(theta, dtype=float)
        s = np.log(np.clip(t, self.theta[0], self.theta[-1]))
        inside = self._I(s)
        out = np.where(t <= self.theta[0], t * self.values[0],
                       np.where(t >= self.theta[-1], self.cum[-1] + (t - self.theta[-1]) * self.values[-1], inside))
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"kind": self.kind, "stage": self.stage, "n": int(self.theta.size)}


def _running_integral(theta, values):
    # int_0^theta D = theta_0 D_0 + int D theta ds  (s = ln theta, uniform)
    s = np.log(theta)
    h = s[1] - s[0]
    if not np.allclose(np.diff(s), h, rtol=1e-8, atol=0):
        raise ValueError("theta grid must be uniform in ln(theta)")
    return theta[0] * values[0] + kernels.cumulative_integral(values * theta, h)


def contraction_step(d_n, r, theta_grid):
    """One application of D -> Dbar/(Dbar - R/theta) on ``theta_grid``."""
    theta = np.asarray(theta_grid, dtype=float)
    if isinstance(d_n, GridDiffusivity) and d_n.theta.shape == theta.shape and np.array_equal(d_n.theta, theta):
        vals, cum = d_n.values, d_n.cum
    else:
        vals = np.asarray(d_n(theta), dtype=float)
        cum = _running_integral(theta, vals)
    dbar = cum / theta
    den = dbar - np.asarray(r(theta)) / theta
    if np.any(den <= 0):
        i = int(np.argmin(den))
        raise ContractionError(f"Dbar - R/theta = {den[i]:.3e} <= 0 at theta = {theta[i]:.6g}")
    new = dbar / den
    stage = None if getattr(d_n, "stage", None) is None else d_n.stage + 1
    return GridDiffusivity(theta, new, _running_integral(theta, new), stage)


def contraction_iterates(R0, n_steps, theta_grid=None):
    """[D_0 = 1, D_1, ..., D_n] for the Arrhenius rate R0 e^{-1/theta}."""
    theta = default_log_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    r = Arrhenius(R0, 1.0)
    ones = np.ones_like(theta)
    out = [GridDiffusivity(theta, ones, _running_integral(theta, ones), 0)]
    for _ in range(n_steps):
        out.append(contraction_step(out[-1], r, theta))
    return out


def contraction_factor_bound(R0):
    """1/(e/R0 - 2 + R0/e), or None when R0 >= (3 - sqrt 5) e / 2."""
    if not R0 > 0:
        raise ValueError("R0 must be positive")
    if R0 >= CONTRACTION_THRESHOLD:
        return None
    return 1.0 / (math.e / R0 - 2.0 + R0 / math.e)


def d1_closed(R0, theta):
    """First iterate from D_0 = 1: 1/(1 - R0 beta e^{-beta})."""
    beta = 1.0 / np.asarray(theta, dtype=float)
    return 1.0 / (1.0 - R0 * beta * np.exp(-beta))


def _d1_integral(R0, beta, tol=1e-17):
    # int_0^theta D_1 = 1/beta + R0 E1(beta) + sum_n R0^n (n-2)!/n^{n-1} Q(n-1, n beta)
    total = 1.0 / beta + R0 * float(specfun.exp_integral_e1(beta))
    n = 2
    while True:
        term = math.exp(n * math.log(R0) + gammaln(n - 1) - (n - 1) * math.log(n)) * gammaincc(n - 1, n * beta)
        total += term
        weight = math.exp(n * math.log(R0) + gammaln(n - 1) - (n - 1) * math.log(n))
        if weight < tol * total or n > 5000:
            break
        n += 1
    return total


def d2_closed(R0, theta):
    """Second iterate I/(I - R0 e^{-beta}), I = int_0^theta D_1 by its series."""
    if not 0 < R0 < math.e:
        raise ValueError("the D_1 series needs 0 < R0 < e")
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.empty(t.shape)
    for i, th in enumerate(t.ravel()):
        beta = 1.0 / th
        I = _d1_integral(R0, beta)
        out.flat[i] = I / (I - R0 * math.exp(-beta))
    return float(out[0]) if np.ndim(theta) == 0 else out


def d2_channel_terms(R0, theta, n_max=40):
    """Individual terms R0^n (n-2)!/n^{n-1} Q(n-1, n beta), n = 2..n_max."""
    beta = 1.0 / float(theta)
    n = np.arange(2, n_max + 1)
    return n, np.exp(n * math.log(R0) + gammaln(n - 1) - (n - 1) * np.log(n)) * gammaincc(n - 1, n * beta)


# ---------------------------------------------------------- small-theta series

def _exact_ok(R0, r_max, m_max):
    frac = Fraction(R0).limit_denominator(10 ** 6)
    return float(frac) == float(R0) and (r_max + 2) * (m_max + 2) <= 400


def _q_exact(R0, sign_a, r_max, m_max, j_variant):
    R = Fraction(R0).limit_denominator(10 ** 6)
    q = {}
    width = m_max + 1
    for m in range(width + 1):
        q[(0, m)] = Fraction((-1) ** m * factorial(m))
    for r in range(r_max + 1):
        q[(r, 0)] = (-sign_a * R) ** r / (r + 1)
    Q = lambda r, m: Fraction(0) if m < 0 else q[(r, m)]
    for r in range(r_max):
        for m in range(width):
            conv = Fraction(0)
            for s in range(r + 1):
                for l in range(m + 1):
                    conv += Q(r - s, m - l) * ((s + 1) * Q(s, l) - (s - l) * Q(s, l - 1))
            j = m if j_variant == "m" else 0
            bracket = Fraction(sign_a * (r - m)) / R * Q(r + 1, m) + (r - j - 1) * Q(r, m) \
                - (r + 1) * Q(r, m + 1) + conv
            q[(r + 1, m + 1)] = Fraction(sign_a) * R / (r + 2) * bracket
    return np.array([[float(q[(r, m)]) for m in range(width + 1)] for r in range(r_max + 1)])


@dataclass
class SeriesSmallTheta:
    """u(theta) ~ -signA theta + R0 E1(1/theta) + R0 sum_{r>=1} sum_m q_{r,m} theta^{1-r+m} e^{-(r+1)/theta}.

    ``q`` carries one extra row and column beyond (r_max, m_max); those are
    used only for the error estimate.
    """
    R0: float
    signA: int
    q: np.ndarray
    r_max: int
    m_max: int
    j_variant: str = "m"
    exact: bool = False

    def _terms(self, theta, deriv=False):
        r = np.arange(self.q.shape[0])[:, None]
        m = np.arange(self.q.shape[1])[None, :]
        p = 1 - r + m
        base = self.R0 * self.q * np.exp(p * math.log(theta) - (r + 1) / theta)
        base[0, :] = 0.0  # r = 0 channel is summed in closed form
        if deriv:
            base = base * (p / theta + (r + 1) / theta ** 2)
        return base

    def value_and_error(self, theta):
        theta = float(theta)
        if not theta > 0:
            raise specfun.DomainError("theta must be positive")
        terms = self._terms(theta)
        kept = terms[: self.r_max + 1, : self.m_max + 1].sum()
        omitted = np.abs(terms[:, self.m_max + 1]).sum() + np.abs(terms[self.r_max + 1, : self.m_max + 1]).sum() \
            if self.q.shape[0] > self.r_max + 1 else np.abs(terms[:, self.m_max + 1]).sum()
        u = -self.signA * theta + self.R0 * float(specfun.exp_integral_e1(1.0 / theta)) + kept
        return u, float(omitted)

    def _sum_many(self, t, deriv=False):
        # all kept terms for a 1-d array of positive theta at once
        r = np.arange(1, self.r_max + 1)[None, :, None]
        m = np.arange(self.m_max + 1)[None, None, :]
        p = 1 - r + m
        x = t[:, None, None]
        with np.errstate(under="ignore"):
            terms = self.q[1: self.r_max + 1, : self.m_max + 1][None] * np.exp(p * np.log(x) - (r + 1) / x)
        if deriv:
            terms = terms * (p / x + (r + 1) / x ** 2)
        return self.R0 * terms.sum(axis=(1, 2))

    def __call__(self, theta):
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        flat = t.ravel()
        if np.any(~(flat > 0)):
            raise specfun.DomainError("theta must be positive")
        vals = -self.signA * flat + self.R0 * np.asarray(specfun.exp_integral_e1(1.0 / flat)) + self._sum_many(flat)
        vals = vals.reshape(t.shape)
        return float(vals[0]) if np.ndim(theta) == 0 else vals

    def derivative(self, theta):
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        flat = t.ravel()
        out = np.full(flat.shape, float(-self.signA))
        pos = flat > 0
        if pos.any():
            x = flat[pos]
            with np.errstate(under="ignore"):
                out[pos] += self.R0 * np.exp(-1.0 / x) / x + self._sum_many(x, deriv=True)
        out = out.reshape(t.shape)
        return float(out[0]) if np.ndim(theta) == 0 else out

    def to_dict(self):
        return {"R0": self.R0, "signA": self.signA, "r_max": self.r_max, "m_max": self.m_max,
                "j_variant": self.j_variant}


def q_coefficients(R0, signA, r_max, m_max, j_variant="m", exact=None):
    """Coefficient table of the small-theta double series.

    Row 0 is (-1)^m m!, column 0 is (-signA R0)^r/(r+1), the rest follows
    the double recurrence.  ``j_variant`` selects what the free index in the
    (r - j - 1) q_{r,m} term means: "m" (default) or "0".  Rational R0 with
    small tables is done in exact fractions.
    """
    if signA not in (1, -1):
        raise ValueError("signA must be +1 or -1")
    if R0 == 0:
        raise ValueError("R0 must be nonzero")
    if not (0 <= r_max <= 60 and 0 <= m_max <= 60):
        raise ValueError("r_max and m_max must lie in [0, 60]")
    if j_variant not in ("m", "0"):
        raise ValueError("j_variant must be 'm' or '0'")
    # one extra row and column for the error estimate
    rows, cols = r_max + 2, m_max + 2
    if exact is None:
        exact = _exact_ok(R0, r_max, m_max)
    if exact:
        q = _q_exact(R0, signA, rows - 1, cols - 1, j_variant)[:rows, :cols]
    else:
        table = np.zeros((rows, cols + 1))
        table[0, :] = [(-1) ** m * math.exp(math.lgamma(m + 1)) for m in range(cols + 1)]
        table[:, 0] = [(-signA * R0) ** r / (r + 1) for r in range(rows)]
        q = kernels.q_fill(table, signA, R0, j_variant == "m")[:rows, :cols]
    if not np.all(np.isfinite(q)) or np.max(np.abs(q)) > 1e300:
        raise OverflowError("q coefficients overflow")
    return SeriesSmallTheta(float(R0), int(signA), q, int(r_max), int(m_max), j_variant, bool(exact))


def u_series_small_theta(s, theta, tol=None):
    """(u, error estimate) from the truncated series.

    Raises SeriesRangeError when ``tol`` is given and the estimate exceeds it.
    """
    u, err = s.value_and_error(theta)
    if tol is not None and err > tol * max(1.0, abs(u)):
        raise SeriesRangeError(f"series error estimate {err:.2e} at theta = {theta} exceeds {tol:.1e}")
    return u, err


# ---------------------------------------------------------- Taylor segments

def rho_coefficients(theta0, R0, n):
    """Taylor coefficients of R0 exp(-a/(1-y)), a = 1/theta0, up to y^n.

    Uses (k+1) rho_{k+1} = (2k - a) rho_k - (k-1) rho_{k-1}; equal to
    -(R0/theta0) 1F1(k+1, 2; -1/theta0) for k >= 1.
    """
    a = 1.0 / theta0
    g = np.zeros(n + 1)
    g[0] = math.exp(-a)
    if n >= 1:
        g[1] = -a * g[0]
    for k in range(1, n):
        g[k + 1] = ((2 * k - a) * g[k] - (k - 1) * g[k - 1]) / (k + 1)
    return R0 * g


def rho_hypergeometric(theta0, R0, k):
    if k == 0:
        return R0 * math.exp(-1.0 / theta0)
    return -(R0 / theta0) * specfun.hyp1f1_b2(k + 1, -1.0 / theta0)


@dataclass
class TaylorSegment:
    theta0: float
    lam: np.ndarray
    trust_radius: float
    den_variant: str = "theta0"
    lo: float = float("nan")
    hi: float = float("nan")

    def value_and_derivative(self, theta):
        y = (self.theta0 - np.atleast_1d(np.asarray(theta, dtype=float))) / self.theta0
        v, dv = kernels.horner(self.lam, y)
        return v, -dv / self.theta0

    def __call__(self, theta):
        v, _ = self.value_and_derivative(theta)
        return float(v[0]) if np.ndim(theta) == 0 else v

    def derivative(self, theta):
        _, d = self.value_and_derivative(theta)
        return float(d[0]) if np.ndim(theta) == 0 else d

    @property
    def trust_interval(self):
        return self.theta0 * (1 - self.trust_radius), self.theta0 * (1 + self.trust_radius)

    def tail(self, theta):
        """Size of the last few terms at theta (truncation indicator)."""
        y = abs((self.theta0 - theta) / self.theta0)
        k = np.arange(self.lam.size - 5, self.lam.size)
        return float(np.max(np.abs(self.lam[k]) * y ** k))

    def to_dict(self):
        return {"kind": "taylor", "theta0": self.theta0, "lo": self.lo, "hi": self.hi,
                "trust_radius": self.trust_radius, "den_variant": self.den_variant,
                "lambda": [float(x) for x in self.lam]}


def _trust_radius(lam, eps=1e-14):
    scale = max(abs(lam[0]), 1e-300)
    n = np.arange(lam.size)
    tail = slice(max(1, lam.size - 10), lam.size)
    with np.errstate(divide="ignore"):
        rad = (eps * scale / np.abs(lam[tail])) ** (1.0 / n[tail])
    return float(np.min(rad))


def u_taylor_segment(theta0, lambda0, N, R0, signA, den_variant="theta0"):
    """Taylor coefficients of u about theta0 in y = (theta0 - theta)/theta0."""
    if not theta0 > 0:
        raise ValueError("theta0 must be positive")
    if den_variant == "theta0":
        den = lambda0 - R0 * math.exp(-1.0 / theta0)
    elif den_variant == "u0":
        den = lambda0 - R0 * math.exp(-1.0 / lambda0)
    else:
        raise ValueError("den_variant must be 'theta0' or 'u0'")
    if abs(den) < 1e-14 * max(1.0, abs(lambda0)):
        raise ZeroDivisionError(f"vanishing denominator at theta0 = {theta0}")
    rho = rho_coefficients(theta0, R0, N)
    lam = kernels.taylor_coefficients(lambda0, rho, signA, theta0, den, N)
    if not np.all(np.isfinite(lam)):
        raise OverflowError("Taylor coefficients overflow")
    return TaylorSegment(float(theta0), lam, _trust_radius(lam), den_variant)


def match_segment(theta0, N, R0, signA, theta_match, u_match, bracket, den_variant="theta0"):
    """Segment about theta0 whose value at theta_match equals u_match."""
    f = lambda l0: u_taylor_segment(theta0, l0, N, R0, signA, den_variant)(theta_match) - u_match
    lam0 = optimize.brentq(f, *bracket, xtol=1e-15, rtol=1e-15, maxiter=200)
    return u_taylor_segment(theta0, lam0, N, R0, signA, den_variant)


# ---------------------------------------------------------- ODE oracle

def ode_oracle_u(r, A, kappa, theta_grid, u_init, rtol=1e-13):
    """Integrate u' = A u/(R(theta) - kappa u) from (theta_s, u_s) with DOP853."""
    theta_s, u_s = map(float, u_init)
    grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    rhs = lambda t, u: A * u / (float(r(t)) - kappa * u)
    out = np.empty(grid.shape)
    for side in (grid >= theta_s, grid < theta_s):
        if not side.any():
            continue
        pts = grid[side]
        end = pts.max() if pts[0] >= theta_s else pts.min()
        if end == theta_s:
            out[side] = u_s
            continue
        sol = integrate.solve_ivp(rhs, (theta_s, end), [u_s], method="DOP853", rtol=rtol,
                                  atol=1e-15 * max(1.0, abs(u_s)), dense_output=True)
        if sol.status != 0:
            raise ArithmeticError(f"ODE oracle failed near theta = {sol.t[-1]:.6g}: {sol.message}")
        out[side] = sol.sol(pts)[0]
    return float(out[0]) if np.ndim(theta_grid) == 0 else out


def oracle_from_series(R0, theta_grid, theta_seed=0.05, signA=-1, series=None):
    """ODE oracle seeded from the small-theta series at ``theta_seed``."""
    s = series if series is not None else q_coefficients(R0, signA, 10, 10)
    return ode_oracle_u(Arrhenius(R0, 1.0), float(signA), 1.0, theta_grid, (theta_seed, s(theta_seed)))


# ---------------------------------------------------------- the chain

class PiecewiseDiffusivity(Diffusivity):
    """Small-theta series on (0, theta_a] followed by Taylor segments."""
    kind = "piecewise_series"

    def __init__(self, series, theta_a, segments, theta_max, meta=None):
        self.series = series
        self.theta_a = float(theta_a)
        self.segments = list(segments)
        self.theta_max = float(theta_max)
        self.meta = dict(meta or {})
        self._edges = np.array([seg.hi for seg in self.segments])

    @property
    def centers(self):
        return [0.0] + [seg.theta0 for seg in self.segments]

    def _locate(self, t):
        return np.searchsorted(self._edges, t, side="left")

    def _eval(self, theta, which):
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if np.any(t < 0) or np.any(t > self.theta_max * (1 + 1e-12)):
            raise ValueError(f"theta outside [0, {self.theta_max}]")
        out = np.empty(t.shape)
        small = t <= self.theta_a
        if small.any():
            ts = t[small]
            if which == "u":
                vals = np.zeros(ts.shape)
                vals[ts > 0] = self.series(ts[ts > 0])
            else:
                vals = self.series.derivative(ts)
            out[small] = vals
        big = ~small
        if big.any():
            idx = np.minimum(self._locate(t[big]), len(self.segments) - 1)
            vals = np.empty(idx.shape)
            for k in np.unique(idx):
                sel = idx == k
                v, d = self.segments[k].value_and_derivative(t[big][sel])
                vals[sel] = v if which == "u" else d
            out[big] = vals
        return float(out[0]) if np.ndim(theta) == 0 else out

    def __call__(self, theta):
        return self._eval(theta, "D")

    def integral(self, theta):
        return self._eval(theta, "u")

    def derivative(self, theta):
        t = np.asarray(theta, dtype=float)
        h = 1e-5 * np.maximum(t, 1e-2)
        lo = np.maximum(t - h, 0.0)
        hi = np.minimum(t + h, self.theta_max)
        return (np.asarray(self(hi)) - np.asarray(self(lo))) / (hi - lo)

    def to_dict(self):
        return {
            "format": "arrhenius-rd/piecewise-diffusivity",
            "version": FORMAT_VERSION,
            "theta_max": self.theta_max,
            "series": {"theta_hi": self.theta_a, **self.series.to_dict()},
            "segments": [seg.to_dict() for seg in self.segments],
            "meta": self.meta,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != "arrhenius-rd/piecewise-diffusivity":
            raise ValueError("not a piecewise diffusivity document")
        sd = doc["series"]
        series = q_coefficients(sd["R0"], sd["signA"], sd["r_max"], sd["m_max"], sd.get("j_variant", "m"))
        segs = []
        for s in doc["segments"]:
            segs.append(TaylorSegment(s["theta0"], np.array(s["lambda"]), s["trust_radius"],
                                      s.get("den_variant", "theta0"), s["lo"], s["hi"]))
        return cls(series, sd["theta_hi"], segs, doc["theta_max"], doc.get("meta"))

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


class PhysicalDiffusivity(Diffusivity):
    """D(theta) = D0 * Dhat(theta/B): a dimensionless build in physical units."""
    kind = "physical"

    def __init__(self, base, D0=1.0, B=1.0):
        self.base, self.D0, self.B = base, float(D0), float(B)
        self.theta_max = base.theta_max * self.B

    def __call__(self, theta):
        out = self.D0 * np.asarray(self.base(np.asarray(theta, dtype=float) / self.B))
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        out = self.D0 / self.B * np.asarray(self.base.derivative(np.asarray(theta, dtype=float) / self.B))
        return float(out) if out.ndim == 0 else out

    def integral(self, theta):
        out = self.B * self.D0 * np.asarray(self.base.integral(np.asarray(theta, dtype=float) / self.B))
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"kind": self.kind, "D0": self.D0, "B": self.B, "base": self.base.to_dict()}


def _pick_series_end(series, tol, start=0.1):
    theta_a = start
    while theta_a > 1e-3:
        _, err = series.value_and_error(theta_a)
        if err <= 0.1 * tol:
            return theta_a
        theta_a *= 0.8
    raise SpliceError("small-theta series never reaches the requested tolerance")


def _segment_for(theta0, lo, hi, R0, signA, theta_match, u_match, slope_lo, slope_hi, tol, den_variant,
                 n_start=64, n_max=2400):
    """Choose N so that the truncation tail is negligible over [lo, hi]."""
    scale = max(1.0, abs(u_match))
    N = n_start
    while N <= n_max:
        lo_guess = u_match + (theta0 - theta_match) * slope_lo
        hi_guess = u_match + (theta0 - theta_match) * slope_hi
        bracket = (min(lo_guess, hi_guess), max(lo_guess, hi_guess))
        try:
            seg = match_segment(theta0, N, R0, signA, theta_match, u_match, bracket, den_variant)
        except ValueError:
            N *= 2
            continue
        worst = max(seg.tail(lo), seg.tail(hi))
        if worst <= 1e-3 * tol * scale:
            seg.lo, seg.hi = lo, hi
            return seg
        N = int(N * 1.5)
    raise SpliceError(f"segment about {theta0} could not reach tol {tol:.1e} with N <= {n_max}")


def build_diffusivity(R0=1.0, theta_max=19.5, tol=1e-10, signA=-1, j_variant="m", den_variant="theta0",
                      max_segments=64, r_max=10, m_max=10):
    """Chain the small-theta series with Taylor segments up to ``theta_max``.

    Centers: 5 theta_a, then x20 each step (0.5, 10, 200, ... for R0 = 1);
    segment k hands over at 1.8 times its center.  Every splice is checked at
    two probe points on either side; the last segment ends at theta_max.
    """
    series = q_coefficients(R0, signA, r_max, m_max, j_variant)
    theta_a = _pick_series_end(series, tol)
    dmax = max(dm_bound(abs(R0)), 1.0)
    segments = []
    lo = theta_a
    u_lo = series(theta_a)
    center = 5.0 * theta_a
    while lo < theta_max:
        if len(segments) >= max_segments:
            raise SpliceError(f"more than {max_segments} segments needed")
        hi = min(1.8 * center, theta_max)
        seg = _segment_for(center, lo, hi, R0, signA, lo, u_lo, 0.5, 1.5 * dmax, tol, den_variant)
        prev = series if not segments else segments[-1]
        for probe in (lo * (1 - 0.02), lo * (1 + 0.02)):
            gap = abs(seg(probe) - prev(probe))
            if gap > tol * max(1.0, abs(u_lo)):
                raise SpliceError(f"splice at {lo:.6g}: mismatch {gap:.2e} at probe {probe:.6g}")
        segments.append(seg)
        lo, u_lo = hi, seg(hi)
        center *= 20.0
    meta = {"R0": R0, "signA": signA, "tol": tol, "j_variant": j_variant, "den_variant": den_variant,
            "theta_a": theta_a, "orders": [int(s.lam.size - 1) for s in segments]}
    return PiecewiseDiffusivity(series, theta_a, segments, theta_max, meta)


def check_against_oracle(build, n=400, theta_seed=0.05):
    """max |u_build - u_oracle| and max |D_build - D_oracle| on (theta_seed, theta_max]."""
    R0 = build.meta["R0"]
    sign_a = build.meta["signA"]
    grid = np.geomspace(theta_seed, build.theta_max, n)
    u_or = oracle_from_series(R0, grid, theta_seed, sign_a, build.series)
    u_b = build.integral(grid)
    R = R0 * np.exp(-1.0 / grid)
    D_or = sign_a * u_or / (R - u_or)
    return float(np.max(np.abs(u_b - u_or))), float(np.max(np.abs(build(grid) - D_or)))


# ---------------------------------------------------------- open questions

GOLDEN = {0.1: 0.1000041579094, 0.5: 0.55582409195937, 0.9: 1.1135172087801, 10.0: 11.79313028084656}


def sig_fig_match(value, reference, digits=11):
    """True if value rounds to reference at ``digits`` significant figures."""
    if reference == 0:
        return abs(value) < 10.0 ** -digits
    exp10 = math.floor(math.log10(abs(reference)))
    return abs(value - reference) <= 0.5 * 10.0 ** (exp10 - digits + 1)


def resolve_open_questions(R0=1.0, signA=-1):
    """Test both readings of the two ambiguous recurrence terms.

    The q-recurrence candidate is accepted when its series at theta = 0.1
    agrees with the ODE oracle to 1e-12 and reproduces 0.1000041579094; the
    Taylor-denominator candidate when the segment about 1/2 matched at 0.1
    reproduces 1.1135172087801 at 0.9.  Raises if neither candidate of a
    pair passes.
    """
    report = {"j": {}, "den": {}}
    oracle_01 = None
    for jv in ("m", "0"):
        s = q_coefficients(R0, signA, 10, 10, jv)
        u01 = s(0.1)
        if oracle_01 is None:
            # oracle seeded deep in the series range where both readings coincide
            s_seed = q_coefficients(R0, signA, 1, 1, "m")
            oracle_01 = ode_oracle_u(Arrhenius(R0, 1.0), float(signA), 1.0, 0.1, (0.02, s_seed(0.02)))
        report["j"][jv] = {
            "u(0.1)": u01,
            "oracle_gap": abs(u01 - oracle_01),
            "pass": abs(u01 - oracle_01) <= 1e-12 and sig_fig_match(u01, GOLDEN[0.1], 12),
        }
    j_ok = [k for k, v in report["j"].items() if v["pass"]]
    if not j_ok:
        raise RuntimeError("no reading of the q-recurrence reproduces u(0.1)")
    series = q_coefficients(R0, signA, 10, 10, j_ok[0])
    u01 = series(0.1)
    for dv in ("theta0", "u0"):
        try:
            seg = match_segment(0.5, 200, R0, signA, 0.1, u01, (0.3, 0.9), dv)
            u09 = seg(0.9)
            ok = sig_fig_match(u09, GOLDEN[0.9], 11) and sig_fig_match(seg.lam[0], GOLDEN[0.5], 11)
            report["den"][dv] = {"u(0.5)": float(seg.lam[0]), "u(0.9)": u09, "pass": ok}
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            report["den"][dv] = {"error": str(exc), "pass": False}
    den_ok = [k for k, v in report["den"].items() if v["pass"]]
    if not den_ok:
        raise RuntimeError("no reading of the Taylor denominator reproduces u(0.9)")
    report["chosen"] = {"j": j_ok[0], "den": den_ok[0]}
    return report
