"""Kirchhoff transform and the forward construction R(theta) from D(theta).

With u = u0 + int_0^theta D the separable reduction u = e^{At} Phi(x),
lap Phi + kappa Phi = 0 exists exactly when

    R(theta) = (kappa + A / D(theta)) * u(theta)

This module holds the value types (SymmetryParams, reaction laws,
diffusivities), that construction, the kappa = 0 closed forms for an
Arrhenius reaction and the Table-1 style closed-form pairs.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from . import specfun

QUAD_ABS_FLOOR = 1e-14
# exp(B/theta) overflows double range for theta < B/709.78; the diffusivity is
# already below 1e-300 there, so it is returned as 0 below this cutoff.
KAPPA0_CUTOFF = 700.0


class CompatibilityError(ValueError):
    pass


class TableSignWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SymmetryParams:
    A: float
    kappa: float
    u0: float = 0.0
    c1: float = 0.0

    def check_signs(self, reaction_sign):
        """Sign constraints forced by the reduction; returns a list of problems."""
        problems = []
        if self.kappa < 0 and reaction_sign > 0 and not self.A > 0:
            problems.append("kappa < 0 with a positive source needs A > 0")
        if self.kappa == 0 and self.c1 != 0 and reaction_sign != 0 and np.sign(self.c1) != np.sign(reaction_sign):
            problems.append("c1 must share the sign of the reaction when kappa = 0")
        return problems

    def to_dict(self):
        return {"A": self.A, "kappa": self.kappa, "u0": self.u0, "c1": self.c1}


def _vectorize(fn, theta):
    arr = np.asarray(theta, dtype=float)
    if arr.ndim == 0:
        return float(fn(float(arr)))
    return np.array([fn(float(t)) for t in arr.ravel()]).reshape(arr.shape)


def _fd_derivative(fn, theta, rel=1e-5):
    theta = np.asarray(theta, dtype=float)
    h = rel * np.maximum(np.abs(theta), 1e-3)
    lo = np.maximum(theta - h, 0.0)
    hi = theta + h
    return (np.asarray(fn(hi)) - np.asarray(fn(lo))) / (hi - lo)


# ------------------------------------------------------------ reaction laws

class ReactionLaw:
    kind = "abstract"

    def __call__(self, theta):
        raise NotImplementedError

    def derivative(self, theta):
        return _fd_derivative(self, theta)

    @property
    def sign(self):
        return 0

    def to_dict(self):
        return {"kind": self.kind}


class Arrhenius(ReactionLaw):
    """R = R0 exp(-B/theta) for theta > 0 and R(0) = 0."""
    kind = "arrhenius"

    def __init__(self, R0, B=1.0):
        if not B > 0:
            raise ValueError("B must be positive")
        self.R0 = float(R0)
        self.B = float(B)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(t > 0, self.R0 * np.exp(-self.B / np.where(t > 0, t, 1.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        t = np.asarray(theta, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        out = np.where(t > 0, self.R0 * self.B / safe ** 2 * np.exp(-self.B / safe), 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def sign(self):
        return int(np.sign(self.R0))

    def to_dict(self):
        return {"kind": self.kind, "R0": self.R0, "B": self.B}


class BetaPower(ReactionLaw):
    """R = R0 beta^m exp(-beta) with beta = B/theta and m > -1."""
    kind = "general_beta_power"

    def __init__(self, R0, m, B=1.0):
        if not m > -1:
            raise ValueError("need m > -1")
        if not B > 0:
            raise ValueError("B must be positive")
        self.R0, self.m, self.B = float(R0), float(m), float(B)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        beta = self.B / safe
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(t > 0, self.R0 * np.exp(self.m * np.log(beta) - beta), 0.0)
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        t = np.asarray(theta, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        beta = self.B / safe
        # dR/dtheta = R (beta - m) / theta
        out = np.where(t > 0, self(safe) * (beta - self.m) / safe, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def sign(self):
        return int(np.sign(self.R0))

    def to_dict(self):
        return {"kind": self.kind, "R0": self.R0, "m": self.m, "B": self.B}


class ConstantReaction(ReactionLaw):
    kind = "constant"

    def __init__(self, R0):
        self.R0 = float(R0)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        out = np.full(t.shape, self.R0)
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        t = np.asarray(theta, dtype=float)
        out = np.zeros(t.shape)
        return float(out) if out.ndim == 0 else out

    @property
    def sign(self):
        return int(np.sign(self.R0))

    def to_dict(self):
        return {"kind": self.kind, "R0": self.R0}


class CompatibleReaction(ReactionLaw):
    """R(theta) = (kappa + A/D) u built from a diffusivity."""
    kind = "from_diffusivity"

    def __init__(self, d, p):
        self.d = d
        self.p = p

    def __call__(self, theta):
        return reaction_from_diffusivity(self.d, self.p, theta)

    def derivative(self, theta):
        # R' = kappa D + A - A u D'/D^2
        t = np.asarray(theta, dtype=float)
        D = np.asarray(self.d(t))
        u = np.asarray(kirchhoff_u(self.d, t, self.p.u0))
        out = self.p.kappa * D + self.p.A - self.p.A * u * np.asarray(self.d.derivative(t)) / D ** 2
        return float(out) if out.ndim == 0 else out

    @property
    def sign(self):
        r = self(1.0)
        return int(np.sign(r))

    def to_dict(self):
        return {"kind": self.kind, "diffusivity": self.d.to_dict(), "params": self.p.to_dict()}


class CatalogueReaction(ReactionLaw):
    """The printed R(theta) column of the four closed-form pairs."""
    kind = "catalogue"

    def __init__(self, row, A, kappa, m=0.0, R0=1.0, B=1.0, sign_c=-1.0):
        if row not in "abcd" or len(row) != 1:
            raise ValueError(f"unknown row {row!r}")
        self.row, self.A, self.kappa = row, float(A), float(kappa)
        self.m, self.R0, self.B = float(m), float(R0), float(B)
        # row c: the printed table has -A tanh; +1 gives the form the construction produces
        self.sign_c = float(sign_c)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        A, k = self.A, self.kappa
        if self.row == "a":
            out = (k * t ** (self.m + 1) + A * t) / (self.m + 1)
        elif self.row == "b":
            out = k * np.expm1(t) - A * np.expm1(-t)
        elif self.row == "c":
            out = k * np.sinh(t) + self.sign_c * A * np.tanh(t)
        else:
            R0, B = self.R0, self.B
            safe = np.where(t > 0, t, 1.0)
            e = np.where(t > 0, np.exp(-B / safe), 0.0)
            num = R0 * t * (B + t) * e * (R0 * e - A * B)
            den = R0 * B * (B + t) * e - A * B * B * t
            out = np.where(t > 0, num / np.where(t > 0, den, 1.0), 0.0)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def sign(self):
        return int(np.sign(self(1.0)))

    def to_dict(self):
        return {"kind": self.kind, "row": self.row, "A": self.A, "kappa": self.kappa,
                "m": self.m, "R0": self.R0, "B": self.B, "sign_c": self.sign_c}


# ------------------------------------------------------------ diffusivities

class Diffusivity:
    """D(theta) with its running integral int_0^theta D."""
    kind = "abstract"
    theta_max = math.inf

    def __call__(self, theta):
        raise NotImplementedError

    def derivative(self, theta):
        return _fd_derivative(self, theta)

    def integral(self, theta):
        return _vectorize(self._quad_integral, theta)

    def _quad_integral(self, theta):
        if theta == 0.0:
            return 0.0
        val, err, info = _quad(lambda s: float(self(s)), 0.0, theta)
        return val

    def to_dict(self):
        return {"kind": self.kind}


def _quad(fn, a, b):
    res = integrate.quad(fn, a, b, epsabs=QUAD_ABS_FLOOR, epsrel=1e-12, limit=400, full_output=1)
    if len(res) > 3 and res[2] != 1 and "roundoff" not in res[3]:
        info = res[2]
        last = int(info["last"])
        worst = int(np.argmax(info["elist"][:last]))
        lo, hi = info["alist"][worst], info["blist"][worst]
        raise ArithmeticError(f"quadrature on [{a}, {b}] did not converge; worst subinterval [{lo}, {hi}]: {res[3]}")
    return res[0], res[1], res[2]


class PowerLaw(Diffusivity):
    kind = "power"

    def __init__(self, m):
        if not m > -1:
            raise ValueError("need m > -1")
        self.m = float(m)

    def __call__(self, theta):
        out = np.asarray(theta, dtype=float) ** self.m
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        t = np.asarray(theta, dtype=float)
        out = self.m * t ** (self.m - 1) if self.m != 0 else np.zeros(t.shape)
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, theta):
        t = np.asarray(theta, dtype=float)
        out = t ** (self.m + 1) / (self.m + 1)
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"kind": self.kind, "m": self.m}


class Exponential(Diffusivity):
    kind = "exp"

    def __call__(self, theta):
        out = np.exp(np.asarray(theta, dtype=float))
        return float(out) if out.ndim == 0 else out

    derivative = __call__

    def integral(self, theta):
        out = np.expm1(np.asarray(theta, dtype=float))
        return float(out) if out.ndim == 0 else out


class Cosh(Diffusivity):
    kind = "cosh"

    def __call__(self, theta):
        out = np.cosh(np.asarray(theta, dtype=float))
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        out = np.sinh(np.asarray(theta, dtype=float))
        return float(out) if out.ndim == 0 else out

    integral = derivative


class ConstantDiffusivity(Diffusivity):
    kind = "constant"

    def __init__(self, value=1.0):
        if not value > 0:
            raise ValueError("D must be positive")
        self.value = float(value)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        out = np.full(t.shape, self.value)
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        t = np.asarray(theta, dtype=float)
        out = np.zeros(t.shape)
        return float(out) if out.ndim == 0 else out

    def integral(self, theta):
        out = self.value * np.asarray(theta, dtype=float)
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


class ArrheniusRowD(Diffusivity):
    """D = (R0/(kappa B))(1 + B/theta) e^{-B/theta} - A/kappa."""
    kind = "arrhenius_row_d"

    def __init__(self, R0, B, A, kappa):
        if kappa == 0:
            raise ValueError("row d needs kappa != 0")
        self.R0, self.B, self.A, self.kappa = float(R0), float(B), float(A), float(kappa)

    def _e(self, t):
        safe = np.where(t > 0, t, 1.0)
        return np.where(t > 0, np.exp(-self.B / safe), 0.0), safe

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        e, safe = self._e(t)
        out = self.R0 / (self.kappa * self.B) * (1 + self.B / safe) * e - self.A / self.kappa
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        t = np.asarray(theta, dtype=float)
        e, safe = self._e(t)
        out = self.R0 * self.B / (self.kappa * safe ** 3) * e
        return float(out) if out.ndim == 0 else out

    def integral(self, theta):
        t = np.asarray(theta, dtype=float)
        e, _ = self._e(t)
        out = self.R0 / (self.kappa * self.B) * t * e - self.A / self.kappa * t
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"kind": self.kind, "R0": self.R0, "B": self.B, "A": self.A, "kappa": self.kappa}


class CallableDiffusivity(Diffusivity):
    kind = "callable"

    def __init__(self, fn, name="custom", antiderivative=None):
        self.fn = fn
        self.name = name
        self._anti = antiderivative

    def __call__(self, theta):
        return self.fn(theta)

    def integral(self, theta):
        if self._anti is not None:
            return self._anti(theta)
        return super().integral(theta)

    def to_dict(self):
        return {"kind": self.kind, "name": self.name}


class ScaledDiffusivity(Diffusivity):
    """c * D(theta); used to build deliberately broken pairs."""
    kind = "scaled"

    def __init__(self, base, factor):
        self.base, self.factor = base, float(factor)
        self.theta_max = getattr(base, "theta_max", math.inf)

    def __call__(self, theta):
        out = self.factor * np.asarray(self.base(theta))
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        out = self.factor * np.asarray(self.base.derivative(theta))
        return float(out) if out.ndim == 0 else out

    def integral(self, theta):
        out = self.factor * np.asarray(self.base.integral(theta))
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"kind": self.kind, "factor": self.factor, "base": self.base.to_dict()}


# --------------------------------------------------- kappa = 0, Arrhenius R

def _ei_defect(x):
    """1 - x e^{-x} Ei(x), without cancellation at large x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    big = x > 40.0
    if np.any(~big):
        out[~big] = 1.0 - specfun.ei_scaled(x[~big])
    for idx in zip(*np.nonzero(big)):
        xi = float(x[idx])
        total, term, n = 0.0, 1.0, 1
        while True:
            nxt = term * n / xi
            if nxt >= term or nxt < 1e-18 * abs(total):
                break
            term = nxt
            total += term
            n += 1
        out[idx] = -total
    return out


def arrhenius_exponent(R0, B, A, theta):
    """G(theta) = int A/R = (A/R0)[theta e^{B/theta} - B Ei(B/theta)].

    Evaluated as (A B / R0)(e^x / x)(1 - x e^{-x} Ei(x)) with x = B/theta,
    which stays accurate for tiny theta.  Returns +-inf where e^x overflows.
    """
    t = np.asarray(theta, dtype=float)
    if np.any(t <= 0):
        raise specfun.DomainError("theta must be positive")
    x = B / t
    with np.errstate(over="ignore"):
        ex_over_x = np.exp(x) / x
        out = (A * B / R0) * ex_over_x * _ei_defect(x).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def closed_form_u_kappa0(r, A, c1, theta, theta_ref=None, offset=True):
    """u = (c1/A)[exp(int^theta A/R) - 1] for kappa = 0.

    The antiderivative is the closed form for Arrhenius and A theta/R0 for a
    constant R; any other law needs ``theta_ref`` (where the antiderivative
    vanishes) and is integrated numerically.  ``offset=False`` drops the -1,
    which is the form whose u satisfies R = A u / D with u(0) = 0.
    """
    if A == 0:
        raise ValueError("A must be nonzero")
    t = np.asarray(theta, dtype=float)
    if isinstance(r, Arrhenius):
        G = arrhenius_exponent(r.R0, r.B, A, t)
    elif isinstance(r, ConstantReaction):
        G = A * t / r.R0
    else:
        if theta_ref is None:
            raise ValueError("theta_ref is required for a general reaction law")

        def one(th):
            val, _, _ = _quad(lambda s: A / float(r(s)), theta_ref, th)
            if not math.isfinite(val):
                raise ArithmeticError(f"int A/R diverges on [{theta_ref}, {th}]")
            return val
        G = _vectorize(one, t)
    with np.errstate(over="ignore"):
        e = np.exp(G)
    if np.any(np.isinf(e)):
        raise OverflowError("exp(int A/R) overflows")
    out = (c1 / A) * (e - 1.0 if offset else e)
    return float(out) if np.ndim(out) == 0 else out


def closed_form_D_kappa0_arrhenius(R0, B, A, c1, theta):
    """D = (c1/R0) e^{B/theta} exp(G(theta)) for the kappa = 0 Arrhenius pair.

    Returns 0 for theta < B/700 (the limit value).  Raises OverflowError
    rather than saturating when the result leaves double range.
    """
    t = np.asarray(theta, dtype=float)
    if np.any(t <= 0):
        raise specfun.DomainError("theta must be positive")
    out = np.zeros(t.shape)
    live = t >= B / KAPPA0_CUTOFF
    if np.any(live):
        tl = t[live]
        G = np.asarray(arrhenius_exponent(R0, B, A, tl))
        with np.errstate(over="ignore", divide="ignore"):
            log_mag = math.log(abs(c1 / R0)) + B / tl + G
        if np.any(log_mag > 709.0):
            bad = tl[np.argmax(log_mag)]
            raise OverflowError(f"D overflows at theta = {bad}")
        out[live] = math.copysign(1.0, c1 / R0) * np.exp(log_mag)
    return float(out) if out.ndim == 0 else out


def kappa0_large_theta_asymptote(R0, B, A, c1, theta):
    """(c1/R0) e^{AB(1-gamma)/R0} B^{-AB/R0} theta^{AB/R0} e^{A theta/R0}."""
    t = np.asarray(theta, dtype=float)
    k = A * B / R0
    return (c1 / R0) * np.exp(k * (1 - specfun.EULER_GAMMA) - k * np.log(B) + k * np.log(t) + A * t / R0)


class ArrheniusKappa0(Diffusivity):
    """Diffusivity compatible with R0 exp(-B/theta) at kappa = 0.

    u(theta) = (c1/A) exp(G(theta)) vanishes at theta = 0, so the running
    integral is u itself.
    """
    kind = "arrhenius_kappa0"

    def __init__(self, R0, B, A, c1):
        if c1 == 0 or A == 0 or R0 == 0:
            raise ValueError("R0, A and c1 must be nonzero")
        if not A / R0 > 0:
            raise ValueError("need A/R0 > 0 so that D -> 0 as theta -> 0")
        self.R0, self.B, self.A, self.c1 = float(R0), float(B), float(A), float(c1)
        self.theta_max = self._overflow_theta()

    def _overflow_theta(self):
        # largest theta with |u| < 1e300, so inversion brackets stay finite
        f = lambda t: math.log(abs(self.c1 / self.A)) + float(arrhenius_exponent(self.R0, self.B, self.A, t)) - 690.0
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
        return optimize.brentq(f, hi / 2 if hi > 1 else 1e-3, hi)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        if np.any(pos):
            out[pos] = closed_form_D_kappa0_arrhenius(self.R0, self.B, self.A, self.c1, t[pos])
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        # D' = D (A/R - B/theta^2)... from D = u A / R
        t = np.asarray(theta, dtype=float)
        D = np.asarray(self(t))
        safe = np.where(t > 0, t, 1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(D > 0, D * (self.A / (self.R0 * np.exp(-self.B / safe)) - self.B / safe ** 2), 0.0)
        return float(out) if out.ndim == 0 else out

    def integral(self, theta):
        t = np.asarray(theta, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        if np.any(pos):
            G = np.asarray(arrhenius_exponent(self.R0, self.B, self.A, t[pos]))
            with np.errstate(over="ignore"):
                out[pos] = (self.c1 / self.A) * np.exp(G)
        return float(out) if out.ndim == 0 else out

    def theta_of_u(self, u):
        """Inverse of u(theta) worked in log space, exact down to u ~ 1e-300."""
        target = math.log(u * self.A / self.c1)
        g = lambda t: float(arrhenius_exponent(self.R0, self.B, self.A, t)) - target
        lo, hi = self.B / 1e4, 1.0
        while g(lo) > 0:
            lo /= 10.0
        while g(hi) < 0:
            hi *= 2.0
        return optimize.brentq(g, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=200)

    def theta_of_u_many(self, u):
        target = np.log(np.asarray(u, dtype=float) * self.A / self.c1)
        lo = np.full(target.shape, math.log(self.B / 2000.0))
        hi = np.full(target.shape, math.log(self.theta_max))
        # bisection in ln(theta); G is increasing and extremely steep near 0
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            g = np.asarray(arrhenius_exponent(self.R0, self.B, self.A, np.exp(mid))) - target
            up = g > 0
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        t = np.exp(0.5 * (lo + hi))
        for _ in range(2):
            g = np.asarray(arrhenius_exponent(self.R0, self.B, self.A, t)) - target
            t = t - g / (self.A / self.R0 * np.exp(self.B / t))
        return t

    def to_dict(self):
        return {"kind": self.kind, "R0": self.R0, "B": self.B, "A": self.A, "c1": self.c1}


# ------------------------------------------------------- Kirchhoff mapping

def kirchhoff_u(d, theta, u0=0.0):
    """u0 + int_0^theta D."""
    t = np.asarray(theta, dtype=float)
    if np.any(t < 0):
        raise specfun.DomainError("theta must be nonnegative")
    out = u0 + np.asarray(d.integral(t))
    return float(out) if out.ndim == 0 else out


def invert_kirchhoff(d, u_value, u0=0.0, theta_max=None):
    """theta >= 0 with u0 + int_0^theta D = u_value (bracket, then safeguarded Newton)."""
    target = float(u_value) - u0
    tol = 1e-12 * (1.0 + abs(float(u_value)))
    if abs(target) <= 0.0:
        return 0.0
    if target < 0:
        raise ValueError(f"u = {u_value} is below u0 = {u0}")
    if hasattr(d, "theta_of_u") and u0 == 0.0:
        return d.theta_of_u(target)
    cap = theta_max if theta_max is not None else getattr(d, "theta_max", math.inf)
    hi = min(1.0, cap)
    f_hi = float(d.integral(hi)) - target
    while f_hi < 0:
        if hi >= cap:
            raise ValueError(f"u = {u_value} is above the range of the diffusivity (theta_max = {cap})")
        hi = min(2.0 * hi, cap)
        f_hi = float(d.integral(hi)) - target
        if hi > 1e12:
            raise ValueError(f"u = {u_value} is out of range")
    lo = 0.0
    x = hi if f_hi == 0 else 0.5 * (lo + hi)
    for _ in range(200):
        fx = float(d.integral(x)) - target
        if abs(fx) <= tol:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        dx = float(d(x))
        step_ok = dx > 0
        if step_ok:
            xn = x - fx / dx
            step_ok = lo < xn < hi
        x = xn if step_ok else 0.5 * (lo + hi)
        if hi - lo < 1e-16 * max(1.0, hi):
            return x
    return x


def invert_kirchhoff_many(d, u_values, u0=0.0, theta_max=None, iters=100):
    """Vectorised invert_kirchhoff: safeguarded Newton on a whole array.

    Values at or below u0 map to theta = 0.
    """
    u = np.asarray(u_values, dtype=float)
    target = (u - u0).ravel()
    out = np.zeros(target.shape)
    live = target > 0
    if not live.any():
        return out.reshape(u.shape) if u.ndim else float(out[0])
    if hasattr(d, "theta_of_u_many") and u0 == 0.0:
        out[live] = d.theta_of_u_many(target[live])
        return out.reshape(u.shape) if u.ndim else float(out[0])
    tg = target[live]
    cap = theta_max if theta_max is not None else getattr(d, "theta_max", math.inf)
    hi = np.full(tg.shape, min(1.0, cap))
    f_hi = np.asarray(d.integral(hi)) - tg
    while np.any(f_hi < 0):
        grow = f_hi < 0
        if np.any(hi[grow] >= cap) or np.any(hi[grow] > 1e12):
            raise ValueError(f"u = {tg[grow].max() + u0} is above the range of the diffusivity")
        hi[grow] = np.minimum(2.0 * hi[grow], cap)
        f_hi[grow] = np.asarray(d.integral(hi[grow])) - tg[grow]
    lo = np.zeros(tg.shape)
    x = 0.5 * hi
    tol = 1e-13 * (1.0 + np.abs(tg + u0))
    for _ in range(iters):
        fx = np.asarray(d.integral(x)) - tg
        pos = fx > 0
        hi = np.where(pos, x, hi)
        lo = np.where(pos, lo, x)
        dx = np.asarray(d(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / dx
        ok = (dx > 0) & (xn > lo) & (xn < hi)
        x_new = np.where(ok, xn, 0.5 * (lo + hi))
        done = (np.abs(fx) <= tol) | (hi - lo <= 4e-16 * np.maximum(hi, 1e-300))
        x = np.where(done, x, x_new)
        if done.all():
            break
    out[live] = x
    return out.reshape(u.shape) if u.ndim else float(out[0])


def reaction_from_diffusivity(d, p, theta):
    """R(theta) = (kappa + A/D(theta)) (u0 + int_0^theta D)."""
    t = np.asarray(theta, dtype=float)
    D = np.asarray(d(t), dtype=float)
    u = np.asarray(kirchhoff_u(d, t, p.u0))
    out = (p.kappa + p.A / D) * u
    return float(out) if out.ndim == 0 else out


def compatibility_residual(d, r, p, thetas):
    """Relative residual of R - A u/D - kappa u at each sample theta."""
    t = np.asarray(thetas, dtype=float)
    D = np.asarray(d(t), dtype=float)
    u = np.asarray(kirchhoff_u(d, t, p.u0))
    R = np.asarray(r(t), dtype=float)
    au = p.A * u / D
    ku = p.kappa * u
    scale = np.maximum(np.abs(R) + np.abs(au) + np.abs(ku), 1e-300)
    return (R - au - ku) / scale


def check_compatible(d, r, p, thetas, tol=1e-9):
    res = compatibility_residual(d, r, p, thetas)
    i = int(np.argmax(np.abs(res)))
    if not abs(res[i]) <= tol:
        raise CompatibilityError(f"compatibility residual {res[i]:.3e} at theta = {np.asarray(thetas)[i]}")
    return float(abs(res[i]))


def helmholtz_ode_residual(d, r, p, theta, rel=1e-5):
    """A D' - D^3 kappa^2/R - D^2 kappa (2A - R')/R - D A (A - R')/R."""
    t = np.asarray(theta, dtype=float)
    D = np.asarray(d(t))
    Dp = np.asarray(_fd_derivative(d, t, rel))
    R = np.asarray(r(t))
    Rp = np.asarray(_fd_derivative(r, t, rel))
    k, A = p.kappa, p.A
    terms = [A * Dp, D ** 3 * k * k / R, D ** 2 * k * (2 * A - Rp) / R, D * A * (A - Rp) / R]
    res = terms[0] - terms[1] - terms[2] - terms[3]
    return res / np.maximum(sum(np.abs(x) for x in terms), 1e-300)


# ------------------------------------------------------- closed-form pairs

CATALOGUE_ROWS = ("a", "b", "c", "d")
_SAMPLE = np.linspace(0.05, 5.0, 32)


def catalogue_pair(row, params=None, p=None, form="printed"):
    """Closed-form (D, R) for one table row.

    ``form="printed"`` keeps the tabulated expression for R; ``"constructed"``
    returns R from the construction itself (different only in row c, where
    the sign of the A tanh term disagrees; that case warns).
    """
    params = dict(params or {})
    if p is None:
        raise ValueError("SymmetryParams required")
    if row not in CATALOGUE_ROWS:
        raise ValueError(f"unknown row {row!r}")
    if form not in ("printed", "constructed"):
        raise ValueError("form must be 'printed' or 'constructed'")
    if p.u0 != 0.0:
        raise ValueError("the table assumes u0 = 0")
    if row == "a":
        m = params.get("m", 0.0)
        if not m > -1:
            raise ValueError("row a needs m > -1")
        d = PowerLaw(m)
        r = CatalogueReaction("a", p.A, p.kappa, m=m)
    elif row == "b":
        d = Exponential()
        r = CatalogueReaction("b", p.A, p.kappa)
    elif row == "c":
        d = Cosh()
        r = CatalogueReaction("c", p.A, p.kappa, sign_c=-1.0 if form == "printed" else 1.0)
    else:
        R0, B = params.get("R0", 1.0), params.get("B", 1.0)
        if not B > 0:
            raise ValueError("row d needs B > 0")
        d = ArrheniusRowD(R0, B, p.A, p.kappa)
        r = CatalogueReaction("d", p.A, p.kappa, R0=R0, B=B)
    res = compatibility_residual(d, r, p, _SAMPLE)
    worst = float(np.max(np.abs(res)))
    if worst > 1e-9:
        if row == "c" and form == "printed":
            warnings.warn(f"row c as printed (kappa sinh - A tanh) misses the construction by {worst:.2e}; "
                          "the construction gives kappa sinh + A tanh", TableSignWarning, stacklevel=2)
        else:
            raise CompatibilityError(f"row {row}: compatibility residual {worst:.3e}")
    return d, r


def abel_variables(r, p, theta, u):
    """(w, z, Phi) = (kappa u - R, -A theta - R, A R / (A + R'))."""
    R = float(r(theta))
    Rp = float(r.derivative(theta))
    den = p.A + Rp
    if abs(den) <= 1e-14 * max(abs(p.A), abs(Rp), 1e-300):
        raise ZeroDivisionError(f"A + R'(theta) vanishes at theta = {theta}")
    return p.kappa * u - R, -p.A * theta - R, p.A * R / den
