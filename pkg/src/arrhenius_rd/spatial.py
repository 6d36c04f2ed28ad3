"""Radial profiles Phi(r) for the separable solution u = e^{At} Phi(r).

Homogeneous media: lap Phi + kappa Phi = 0 in 1-3 dimensions.
Heterogeneous (planar radial, f = f(r)): (1/r)(r f Phi')' + kappa Phi = 0.
"""
import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import specfun

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


class ProfileError(ValueError):
    pass


def first_zero(dim):
    """First zero of the regular kappa > 0 profile: pi/2, lambda_{0,1}, pi."""
    if dim == 1:
        return math.pi / 2
    if dim == 2:
        return specfun.bessel_zero(0, 1).value
    if dim == 3:
        return math.pi
    raise ProfileError(f"unsupported dimension {dim}")


# ------------------------------------------------------------ heterogeneity

@dataclass(frozen=True)
class Heterogeneity:
    kind: str  # none | inverse_r | square | custom
    r0: float = 1.0
    fn: object = None
    dfn: object = None

    def f(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "none":
            return np.ones_like(r)
        if self.kind == "inverse_r":
            return self.r0 / r
        if self.kind == "square":
            return (r / self.r0) ** 2
        return np.asarray(self.fn(r), dtype=float)

    def df(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "none":
            return np.zeros_like(r)
        if self.kind == "inverse_r":
            return -self.r0 / r ** 2
        if self.kind == "square":
            return 2 * r / self.r0 ** 2
        if self.dfn is not None:
            return np.asarray(self.dfn(r), dtype=float)
        h = 1e-6 * np.maximum(np.abs(r), 1e-3)
        return (np.asarray(self.fn(r + h)) - np.asarray(self.fn(r - h))) / (2 * h)

    def to_dict(self):
        return {"kind": self.kind, "r0": self.r0}


NO_HETERO = Heterogeneity("none")


# ------------------------------------------------------------ profiles

@dataclass
class SpatialProfile:
    """Phi(r) and Phi'(r) with the data that identify the family."""
    kappa: float
    dim: int
    family: str
    phi: object
    dphi: object
    K: float = 0.0
    coefficients: dict = field(default_factory=dict)
    hetero: Heterogeneity = NO_HETERO
    domain: tuple = (0.0, math.inf)
    extension: bool = False

    def __call__(self, r):
        out = np.asarray(self.phi(np.asarray(r, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def derivative(self, r):
        out = np.asarray(self.dphi(np.asarray(r, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def scaled(self, c):
        return SpatialProfile(self.kappa, self.dim, self.family, lambda r: c * self.phi(r), lambda r: c * self.dphi(r),
                              self.K, {**self.coefficients, "scale": c * self.coefficients.get("scale", 1.0)},
                              self.hetero, self.domain, self.extension)

    def ode_residual(self, r, h_rel=1e-3):
        """(1/r^{d-1})(r^{d-1} f Phi')' + kappa Phi with Phi'' by differencing Phi' (4th order)."""
        r = np.asarray(r, dtype=float)
        h = h_rel * np.maximum(np.abs(r), 1e-2)
        dp = self.dphi
        d2 = (-dp(r + 2 * h) + 8 * dp(r + h) - 8 * dp(r - h) + dp(r - 2 * h)) / (12 * h)
        f = self.hetero.f(r)
        df = self.hetero.df(r)
        first = self.dphi(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = np.where(r > 0, (self.dim - 1) / np.where(r > 0, r, 1.0), 0.0)
        # at r = 0 a regular profile has Phi'/r -> Phi''
        lap_extra = np.where(r > 0, geo * first, (self.dim - 1) * d2)
        return f * d2 + df * first + f * lap_extra + self.kappa * self.phi(r)

    def max_relative_residual(self, n=200, r_lo=None, r_hi=None):
        lo = self.domain[0] if r_lo is None else r_lo
        hi = self.domain[1] if r_hi is None else r_hi
        if not math.isfinite(hi):
            hi = lo + 20.0 / max(self.K, 1e-3)
        pad = 1e-3 * (hi - lo)
        r = np.linspace(lo + pad, hi - pad, n)
        res = self.ode_residual(r)
        return float(np.max(np.abs(res)) / np.max(np.abs(self.phi(r))))

    def to_dict(self):
        return {"kappa": self.kappa, "dim": self.dim, "family": self.family, "K": self.K,
                "coefficients": {k: float(v) for k, v in self.coefficients.items()},
                "hetero": self.hetero.to_dict(), "domain": [float(x) for x in self.domain],
                "extension": self.extension}


def phi_radial(kappa, dim, K=None, c2=0.0, c3=1.0, r_min=None, r_max=None):
    """Regular (kappa > 0), Laplace (kappa = 0) or decaying (kappa < 0) profile."""
    if dim not in (1, 2, 3):
        raise ProfileError(f"unsupported dimension {dim}")
    if kappa != 0:
        k_from = math.sqrt(abs(kappa))
        if K is None:
            K = k_from
        elif not math.isclose(K, k_from, rel_tol=1e-12):
            raise ProfileError("K must equal sqrt(|kappa|)")
        if not K > 0:
            raise ProfileError("K must be positive")
    if kappa > 0:
        if dim == 1:
            phi = lambda r: np.cos(K * r)
            dphi = lambda r: -K * np.sin(K * r)
            fam = "cos"
        elif dim == 2:
            phi = lambda r: specfun.bessel_family("J0", K * np.abs(r))
            dphi = lambda r: -K * specfun.bessel_family("J1", K * np.abs(r)) * np.sign(r)
            fam = "J0"
        else:
            phi = lambda r: specfun.bessel_family("spherical_j0", K * np.abs(r))
            dphi = lambda r: K * specfun.spherical_j0_prime(K * np.abs(r)) * np.sign(r)
            fam = "j0"
        dom = (0.0 if r_min is None else r_min, first_zero(dim) / K if r_max is None else r_max)
        return SpatialProfile(kappa, dim, fam, phi, dphi, K, {}, NO_HETERO, dom)
    if kappa == 0:
        if dim == 1:
            phi = lambda r: c2 - c3 * r
            dphi = lambda r: -c3 * np.ones_like(r)
            fam = "linear"
        elif dim == 2:
            phi = lambda r: c2 - c3 * np.log(r)
            dphi = lambda r: -c3 / r
            fam = "log"
        else:
            phi = lambda r: c2 - c3 / r
            dphi = lambda r: c3 / r ** 2
            fam = "inverse"
        lo = (0.0 if dim == 1 else 1e-12) if r_min is None else r_min
        return SpatialProfile(0.0, dim, fam, phi, dphi, 0.0, {"c2": c2, "c3": c3}, NO_HETERO,
                              (lo, math.inf if r_max is None else r_max))
    if dim == 1:
        phi = lambda r: np.exp(-K * r)
        dphi = lambda r: -K * np.exp(-K * r)
        fam, ext = "exp", True
    elif dim == 2:
        phi = lambda r: specfun.bessel_family("K0", K * r)
        dphi = lambda r: -K * specfun.bessel_family("K1", K * r)
        fam, ext = "K0", False
    else:
        phi = lambda r: np.exp(-K * r) / r
        dphi = lambda r: -np.exp(-K * r) * (K * r + 1) / r ** 2
        fam, ext = "exp_over_r", True
    lo = (0.0 if dim == 1 else 1e-12) if r_min is None else r_min
    return SpatialProfile(kappa, dim, fam, phi, dphi, K, {}, NO_HETERO, (lo, math.inf if r_max is None else r_max), ext)


# ------------------------------------------------------------ boundary fitting

def fit_dirichlet(dim, r1):
    if not r1 > 0:
        raise ProfileError("r1 must be positive")
    return first_zero(dim) / r1


BiotFit = namedtuple("BiotFit", "K A")


def _biot_ratio(dim, x):
    # -Phi'(x)/Phi(x) for the regular profile, as a function of x = K r2
    if dim == 1:
        return math.tan(x)
    if dim == 2:
        return specfun.bessel_family("J1", x) / specfun.bessel_family("J0", x)
    return -specfun.spherical_j0_prime(x) / specfun.bessel_family("spherical_j0", x)


def fit_biot(dim, r2, Bi, D0=None):
    """K in (0, lambda_1/r2) with -Phi_r/Phi = Bi at r2, i.e. K (-Phi'/Phi)(K r2) = Bi.

    Bisection to 1e-12; with ``D0`` also returns A = -K^2 D0.
    """
    if not Bi > 0 or not r2 > 0:
        raise ProfileError("need Bi > 0 and r2 > 0")
    hi = first_zero(dim) / r2
    g = lambda K: K * _biot_ratio(dim, K * r2) - Bi
    lo = 0.0
    # g(0+) = -Bi < 0 and g -> +inf at the first zero
    hi_eval = hi * (1 - 1e-15)
    assert g(hi_eval) > 0, "Biot bracket violated"
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    K = 0.5 * (lo + hi)
    return BiotFit(K, None if D0 is None else -K * K * D0)


def fit_flux(dim, r0, r1, Q, A):
    """kappa = 0 profile with Phi(r1) = 0 and outward strength |A| Q at r0."""
    if dim not in (2, 3):
        raise ProfileError("flux fitting is defined for dim 2 and 3")
    if not 0 < r0 < r1:
        raise ProfileError("need 0 < r0 < r1")
    if not Q > 0 or not A < 0:
        raise ProfileError("need Q > 0 and A < 0")
    if dim == 3:
        c3 = -abs(A) * Q / (4 * math.pi)
        c2 = c3 / r1
    else:
        c3 = abs(A) * Q / (2 * math.pi)
        c2 = c3 * math.log(r1)
    return phi_radial(0.0, dim, c2=c2, c3=c3, r_min=r0, r_max=r1)


# ------------------------------------------------------------ heterogeneous media

def _custom_integral(f, r, r1):
    val, _ = integrate.quad(lambda s: 1.0 / (s * float(f(s))), r, r1, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def hetero_phi(f_kind, kappa, params):
    """Closed-form heterogeneous profiles (planar radial).

    params: r0, r1, and K (for kappa != 0) plus optional c1, c2,
    dirichlet (bool, default True) and fn/dfn for a custom f.
    kappa = 0 returns Phi = c1 int_r^{r1} ds/(s f(s)).
    """
    p = dict(params)
    r0 = float(p.get("r0", 1.0))
    r1 = float(p.get("r1", 4.0 * r0))
    c1 = float(p.get("c1", 1.0))
    dirichlet = p.get("dirichlet", True)
    if f_kind == "custom":
        het = Heterogeneity("custom", r0, p["fn"], p.get("dfn"))
    elif f_kind in ("inverse_r", "square"):
        het = Heterogeneity(f_kind, r0)
    else:
        raise ProfileError(f"unknown heterogeneity {f_kind!r}")
    dom = (r0, r1)
    if kappa == 0:
        if f_kind == "square":
            phi = lambda r: c1 * 0.5 * r0 ** 2 * (1.0 / r ** 2 - 1.0 / r1 ** 2)
            dphi = lambda r: -c1 * r0 ** 2 / r ** 3
        elif f_kind == "inverse_r":
            phi = lambda r: c1 * (r1 - r) / r0
            dphi = lambda r: -c1 / r0 * np.ones_like(r)
        else:
            f = het.f

            def phi(r):
                arr = np.asarray(r, dtype=float)
                vals = np.array([_custom_integral(f, x, r1) for x in np.atleast_1d(arr).ravel()])
                return c1 * (vals.reshape(arr.shape) if arr.ndim else vals[0])

            dphi = lambda r: -c1 / (np.asarray(r) * f(r))
        return SpatialProfile(0.0, 2, f"hetero_{f_kind}_laplace", phi, dphi, 0.0, {"c1": c1, "r1": r1}, het, dom)
    if f_kind == "custom":
        raise ProfileError("kappa != 0 needs f = r0/r or f = (r/r0)^2")
    K = float(p["K"]) if "K" in p else math.sqrt(abs(kappa))
    if not math.isclose(K * K, abs(kappa), rel_tol=1e-12):
        raise ProfileError("K must equal sqrt(|kappa|)")
    k0 = K * r0
    if f_kind == "square":
        if kappa > 0:
            if k0 == 1.0:
                raise ProfileError("K r0 = 1 is the degenerate double root")
            if k0 < 1:
                s = math.sqrt(1 - k0 * k0)
                pp, pm = -1 + s, -1 - s
                c2 = -c1 * r1 ** (2 * s) if dirichlet else float(p.get("c2", 0.0))
                phi = lambda r: c1 * r ** pp + c2 * r ** pm
                dphi = lambda r: c1 * pp * r ** (pp - 1) + c2 * pm * r ** (pm - 1)
                return SpatialProfile(kappa, 2, "euler", phi, dphi, K,
                                      {"c1": c1, "c2": c2, "p_plus": pp, "p_minus": pm}, het, dom)
            w = math.sqrt(k0 * k0 - 1)
            if dirichlet:
                # (1/r) sin(w ln(r1/r)) = (1/r)[c1' cos(w ln r) + c2' sin(w ln r)]
                a, b = c1 * math.sin(w * math.log(r1)), -c1 * math.cos(w * math.log(r1))
            else:
                a, b = c1, float(p.get("c2", 0.0))
            phi = lambda r: (a * np.cos(w * np.log(r)) + b * np.sin(w * np.log(r))) / r
            dphi = lambda r: (-a * np.cos(w * np.log(r)) - b * np.sin(w * np.log(r))
                              - a * w * np.sin(w * np.log(r)) + b * w * np.cos(w * np.log(r))) / r ** 2
            return SpatialProfile(kappa, 2, "euler_oscillatory", phi, dphi, K,
                                  {"c1": a, "c2": b, "omega": w}, het, dom)
        s = math.sqrt(1 + k0 * k0)
        pp, pm = -1 + s, -1 - s
        if dirichlet and p.get("decaying", True):
            ca, cb = 0.0, c1
        else:
            ca, cb = float(p.get("c2", 0.0)), c1
        phi = lambda r: ca * r ** pp + cb * r ** pm
        dphi = lambda r: ca * pp * r ** (pp - 1) + cb * pm * r ** (pm - 1)
        return SpatialProfile(kappa, 2, "euler_decaying", phi, dphi, K,
                              {"c_plus": ca, "c_minus": cb, "p_plus": pp, "p_minus": pm}, het, dom)
    # f = r0/r: Airy in -alpha r (kappa > 0) or +alpha r (kappa < 0)
    alpha = K ** (2.0 / 3.0) * r0 ** (-1.0 / 3.0)
    sgn = -1.0 if kappa > 0 else 1.0
    if kappa > 0 and dirichlet:
        ai1, _, bi1, _ = specfun.airy(sgn * alpha * r1)
        ca, cb = c1 * float(bi1), -c1 * float(ai1)
    elif kappa < 0 and p.get("decaying", True):
        ca, cb = c1, 0.0
    else:
        ca, cb = c1, float(p.get("c2", 0.0))

    def phi(r):
        ai, _, bi, _ = specfun.airy(sgn * alpha * np.asarray(r, dtype=float))
        return ca * ai + cb * bi

    def dphi(r):
        _, aip, _, bip = specfun.airy(sgn * alpha * np.asarray(r, dtype=float))
        return sgn * alpha * (ca * aip + cb * bip)

    return SpatialProfile(kappa, 2, "airy", phi, dphi, K, {"c1": ca, "c2": cb, "alpha": alpha}, het, dom)


def hetero_laplace_quadrature(f, r, r1, c1=1.0):
    """c1 int_r^{r1} ds/(s f(s)) by adaptive quadrature (cross-check helper)."""
    return np.array([c1 * _custom_integral(f, x, r1) for x in np.atleast_1d(r)])


# ------------------------------------------------------------ boundary specs

@dataclass(frozen=True)
class BoundarySpec:
    kind: str  # dirichlet_zero | biot | flux | regular_at_origin
    dim: int
    r: float = 0.0
    Bi: float = 0.0
    Q: float = 0.0
    A: float = 0.0

    def to_dict(self):
        d = {"kind": self.kind, "dim": self.dim, "r": self.r}
        if self.kind == "biot":
            d["Bi"] = self.Bi
        if self.kind == "flux":
            d.update(Q=self.Q, A=self.A)
        return d

    def residual(self, u, u_r, t, f=1.0):
        """Residual of the condition at self.r given u and u_r there at time t."""
        if self.kind == "dirichlet_zero":
            return u
        if self.kind == "regular_at_origin":
            return u_r
        if self.kind == "biot":
            return -u_r - self.Bi * u
        if self.kind == "flux":
            area = SPHERE_AREA[self.dim] * self.r ** (self.dim - 1)
            return -area * f * u_r - abs(self.A) * self.Q * math.exp(self.A * t)
        raise ValueError(f"unknown boundary kind {self.kind!r}")
