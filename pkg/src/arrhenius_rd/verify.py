"""Independent checks of assembled solutions.

* pde_residual: centred finite differences of theta_t - div(f D grad theta) - R.
* evolve_nonlinear: method of lines in the Kirchhoff variable,
  u_t = D(u) (div(f grad u) + R(theta(u))), implicit trapezoid with
  step-doubling error control.
* stability_criterion / stability_experiment: the planar perturbation test
  of the similarity solution in the frame v = u e^{-At}.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from . import construct as cs
from . import dsolve, kernels, scenario as scn, spatial, specfun

EVOLVE_TOL = 1e-8
COMPARISON_SLACK = 0.05
# below this relative residual the field is resolved to roundoff and no order can be read off
ROUNDOFF_FLOOR = 1e-7
RATE_SLACK = 0.2


class GridError(ValueError):
    pass


class EvolveError(RuntimeError):
    pass


# ------------------------------------------------------------ grids

@dataclass
class Grid:
    r: np.ndarray
    t: np.ndarray
    dim: int
    f: np.ndarray = None
    kind: str = None  # "uniform" | "geometric" when generated from a mapping

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        for name, x in (("r", self.r), ("t", self.t)):
            if x.size < 4:
                raise GridError(f"need at least 4 {name} nodes")
            if np.any(np.diff(x) <= 0):
                raise GridError(f"{name} nodes must be strictly increasing")
        if self.f is None:
            self.f = np.ones_like(self.r)

    @property
    def shape(self):
        return (self.t.size, self.r.size)

    def coarsened(self):
        """Same mapping with about half the radial nodes (every other node for free-form grids)."""
        n = self.r.size
        if self.kind is not None:
            r = radial_nodes(self.r[0], self.r[-1], (n + 1) // 2, self.kind)
        elif (n - 1) % 2 == 0:
            r = self.r[::2]
        else:
            raise GridError("free-form grids need an odd node count to be coarsened")
        return Grid(r, self.t, self.dim, None, self.kind)


def radial_nodes(lo, hi, n, kind="uniform"):
    if kind == "geometric":
        if not lo > 0:
            raise GridError("geometric grids need r_min > 0")
        r = lo * (hi / lo) ** np.linspace(0.0, 1.0, n)
    elif kind == "uniform":
        r = np.linspace(lo, hi, n)
    else:
        raise GridError(f"unknown grid kind {kind!r}")
    r[0], r[-1] = lo, hi
    return r


def grid_for(s, nr=400, nt=64, window=None):
    """Radial grid of the scenario's kind on its residual window, and nt times."""
    lo, hi = window or s.window
    kind = s.grid_kind if lo > 0 else "uniform"
    r = radial_nodes(lo, hi, nr, kind)
    t = np.linspace(s.t_range[0], s.t_range[1], nt)
    return Grid(r, t, s.dim, None, kind)


def _faces(r):
    return 0.5 * (r[1:] + r[:-1])


# ------------------------------------------------------------ residual

@dataclass
class ResidualReport:
    max_abs_residual: float
    rms_residual: float
    r_at_max: float
    t_at_max: float
    scale: float
    order: float = float("nan")
    coarse_max: float = float("nan")
    nr: int = 0
    nt: int = 0
    roundoff_limited: bool = False

    @property
    def relative(self):
        return self.max_abs_residual / self.scale if self.scale > 0 else 0.0 if self.max_abs_residual == 0 else math.inf

    def passed(self, tol=1e-5, min_order=1.8):
        """Residual within tol and, unless it sits at the roundoff floor, order >= min_order."""
        ok = self.relative <= tol
        if min_order is not None and not self.roundoff_limited:
            ok = ok and math.isfinite(self.order) and self.order >= min_order
        return bool(ok)

    def as_rows(self):
        return [("max_abs_residual", self.max_abs_residual), ("rms_residual", self.rms_residual),
                ("relative_residual", self.relative), ("max_abs_theta_t", self.scale),
                ("r_at_max", self.r_at_max), ("t_at_max", self.t_at_max),
                ("coarse_max_abs_residual", self.coarse_max), ("order_estimate", self.order),
                ("roundoff_limited", int(self.roundoff_limited)), ("nr", self.nr), ("nt", self.nt)]


def _check_singular(s, r):
    if r[0] < 0:
        raise GridError("negative radius")
    if r[0] == 0.0:
        if s.hetero.kind != "none":
            raise GridError("grid spans the singular point r = 0 of the heterogeneity")
        if s.profile.family not in ("cos", "J0", "j0"):
            raise GridError("grid spans the singular point r = 0 of the profile")


def face_diffusivity(d, theta, D, face="secant", u0=0.0):
    """D on the cell faces: the secant (u_{i+1} - u_i)/(theta_{i+1} - theta_i) or the plain average.

    The secant value is the exact mean of D over [theta_i, theta_{i+1}], so the
    flux D grad(theta) is differenced without the O(h^2 D'' theta_r^3) error of
    the arithmetic mean, which is large for D with an essential singularity at 0.
    """
    avg = 0.5 * (D[..., 1:] + D[..., :-1])
    if face == "arithmetic":
        return avg
    if face != "secant":
        raise ValueError("face must be 'secant' or 'arithmetic'")
    u = np.asarray(cs.kirchhoff_u(d, theta, u0))
    dth = np.diff(theta, axis=-1)
    close = np.abs(dth) <= 1e-9 * np.maximum(np.abs(theta[..., 1:]), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        sec = np.diff(u, axis=-1) / np.where(close, 1.0, dth)
    return np.where(close, avg, sec)


def radial_divergence(r, theta, D_face, f_face, dim, D_origin=None):
    """(1/r^{d-1}) d/dr (r^{d-1} f D dtheta/dr) at interior nodes (conservative form).

    theta has shape (..., nr); D_face (..., nr-1) and f_face (nr-1) live on
    the midpoints between nodes.  With r[0] = 0 the first
    entry is the symmetric limit d * D * 2 (theta_1 - theta_0)/h^2 (with D
    taken on the first face unless D_origin is given), otherwise the result
    covers nodes 1..nr-2.
    """
    if f_face is None:
        f_face = np.ones(r.size - 1)
    th2 = np.atleast_2d(theta)
    Df2 = np.atleast_2d(D_face)
    inner = np.empty((th2.shape[0], r.size - 2))
    for k in range(th2.shape[0]):
        inner[k] = kernels.radial_divergence(r, f_face * Df2[k], th2[k], dim)[1:-1]
    inner = inner.reshape(np.shape(theta)[:-1] + (r.size - 2,))
    if r[0] == 0.0:
        h = r[1]
        d0 = D_face[..., 0] if D_origin is None else D_origin
        origin = dim * d0 * 2.0 * (theta[..., 1] - theta[..., 0]) / (h * h)
        return np.concatenate([np.asarray(origin)[..., None], inner], axis=-1)
    return inner


def _residual_once(sol, s, r, t, f, delta, face):
    th = sol.theta(r[None, :], t[:, None])
    th_p = sol.theta(r[None, :], t[:, None] + delta)
    th_m = sol.theta(r[None, :], t[:, None] - delta)
    theta_t = (th_p - th_m) / (2 * delta)
    D = np.asarray(s.diffusivity(th))
    Df = face_diffusivity(s.diffusivity, th, D, face, s.params.u0)
    div = radial_divergence(r, th, Df, f, s.dim)
    first = 0 if r[0] == 0.0 else 1
    nodes = slice(first, r.size - 1)
    R = np.asarray(s.reaction(th[:, nodes]))
    res = theta_t[:, nodes] - div - R
    return res, theta_t[:, nodes], r[nodes]


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _inverse_conductance(r, dim, het):
    """int_{r_i}^{r_{i+1}} dr / (r^{d-1} f(r)) for every cell face."""
    a, b = r[:-1], r[1:]
    if het.kind == "none":
        if dim == 1:
            return b - a
        if dim == 2:
            return np.log(b / a)
        return 1.0 / a - 1.0 / b
    if dim == 2 and het.kind == "square":
        return 0.5 * het.r0 ** 2 * (a ** -2.0 - b ** -2.0)
    if dim == 2 and het.kind == "inverse_r":
        return (b - a) / het.r0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = 1.0 / (x ** (dim - 1) * np.asarray(het.f(x), dtype=float))
    return half * (vals @ _GL_W)


def face_weights(s, r, kind="harmonic"):
    """Per-face factor w such that the face flux is rf^{d-1} w (q_{i+1} - q_i)/h.

    "harmonic": exact conductance h / int dr/(r^{d-1} f), so the flux of any
    solution of (r^{d-1} f q_r)_r = 0 is exact (annular domains only; near
    r = 0 it is inconsistent for regular fields and "midpoint" is used).
    "harmonic_f": the harmonic mean of f alone.  "midpoint": f(rf).
    """
    rf = _faces(r)
    mid = np.asarray(s.hetero.f(rf), dtype=float) if s.hetero.kind != "none" else np.ones(rf.size)
    if kind == "midpoint" or r[0] == 0.0:
        return mid
    h = np.diff(r)
    if kind == "harmonic":
        return h / _inverse_conductance(r, s.dim, s.hetero) / rf ** (s.dim - 1)
    if kind == "harmonic_f":
        if s.hetero.kind == "none":
            return mid
        x = rf[:, None] + 0.5 * h[:, None] * _GL_X[None, :]
        inv = 0.5 * h * ((1.0 / np.asarray(s.hetero.f(x), dtype=float)) @ _GL_W)
        return h / inv
    raise ValueError("kind must be 'harmonic', 'harmonic_f' or 'midpoint'")


def pde_residual(sol, s, g, refine=True, face="secant", weights="auto"):
    """Residual of the full nonlinear PDE on the grid, with an order estimate.

    theta_t uses a centred difference with step 0.25 (h/L)/|A| so that the
    time and space errors shrink together.  The order estimate compares with
    the coarser grid of the same mapping.  Face conductances are harmonic for
    kappa = 0 or heterogeneous media (exact flux for the Laplace part),
    midpoint otherwise.
    """
    r = g.r
    _check_singular(s, r)
    if weights == "auto":
        weights = "harmonic" if (s.params.kappa == 0 or s.hetero.kind != "none") else "midpoint"
    f = face_weights(s, r, weights)
    span = r[-1] - r[0]
    rate = max(abs(s.params.A), 1e-12)
    h = span / (r.size - 1)
    delta = 0.25 * (h / span) / rate
    res, tt, rn = _residual_once(sol, s, r, g.t, f, delta, face)
    a = np.abs(res)
    k = np.unravel_index(int(np.argmax(a)), a.shape)
    rep = ResidualReport(float(a[k]), float(np.sqrt(np.mean(res * res))), float(rn[k[1]]), float(g.t[k[0]]),
                         float(np.max(np.abs(tt))), nr=r.size, nt=g.t.size)
    if refine and r.size >= 9:
        gc = g.coarsened()
        rc = gc.r
        hc = (rc[-1] - rc[0]) / (rc.size - 1)
        res_c, _, _ = _residual_once(sol, s, rc, g.t, face_weights(s, rc, weights), delta * hc / h, face)
        coarse = float(np.max(np.abs(res_c)))
        rep.coarse_max = coarse
        if rep.relative < ROUNDOFF_FLOOR:
            rep.roundoff_limited = True
        elif coarse > 0:
            rep.order = math.log(coarse / rep.max_abs_residual) / math.log(hc / h)
    return rep


# ------------------------------------------------------------ u-variable tables

class KirchhoffTables:
    """D and R as smooth functions of u on [0, u_hi], tabulated once."""

    def __init__(self, d, reaction, u_hi, n=4097, u0=0.0):
        self.u = np.linspace(0.0, u_hi, n)
        theta = cs.invert_kirchhoff_many(d, self.u + u0, u0)
        D = np.asarray(d(theta), dtype=float)
        if not np.all(np.isfinite(D)) or np.any(D[1:] <= 0):
            bad = self.u[1:][~(D[1:] > 0)]
            raise EvolveError(f"F(u) = 1/D undefined for u in [{bad.min():.3g}, {bad.max():.3g}]")
        self.u_hi = u_hi
        self._D = CubicSpline(self.u, D)
        self._R = CubicSpline(self.u, np.asarray(reaction(theta), dtype=float))
        self._dD = self._D.derivative()
        self._dR = self._R.derivative()
        self.d = d

    def check(self, u):
        if np.any(u < -1e-12 * self.u_hi) or np.any(u > self.u_hi):
            raise EvolveError(f"u left the tabulated range [0, {self.u_hi:.6g}]")

    def D(self, u):
        return self._D(u)

    def R(self, u):
        return self._R(u)

    def dD(self, u):
        return self._dD(u)

    def dR(self, u):
        return self._dR(u)


# ------------------------------------------------------------ time stepping

class _System:
    """u_t = D(u) (L u + b(t) + R(u)) on the free nodes."""

    def __init__(self, L, b, tables):
        self.L = sparse.csr_matrix(L)
        self.b = b
        self.tab = tables
        self.n = self.L.shape[0]
        self.eye = sparse.identity(self.n, format="csc")

    def rhs(self, t, u):
        inner = self.L @ u + self.b(t) + self.tab.R(u)
        return self.tab.D(u) * inner

    def jac(self, t, u):
        inner = self.L @ u + self.b(t) + self.tab.R(u)
        Du = self.tab.D(u)
        diag = self.tab.dD(u) * inner + Du * self.tab.dR(u)
        return sparse.diags(Du) @ self.L + sparse.diags(diag)


def _trapezoid_step(sys, t, y, f0, dt, lu, scale, newton_tol):
    y1 = y + dt * f0
    t1 = t + dt
    for _ in range(10):
        g = y1 - y - 0.5 * dt * (f0 + sys.rhs(t1, y1))
        dy = lu.solve(-g)
        y1 = y1 + dy
        if np.max(np.abs(dy)) <= newton_tol * scale:
            return y1
    return None


def integrate(sys, y0, t0, t_out, tol=EVOLVE_TOL, dt0=None, steps=None, max_steps=200000):
    """Implicit trapezoid from t0 through the output times.

    Adaptive runs halve each step and compare (step doubling, error/3 against
    tol * max|y|).  ``steps`` replays a recorded sequence of step endpoints
    instead, so two runs share every discretization choice.  Returns
    (outputs, endpoints).
    """
    t_out = np.asarray(t_out, dtype=float)
    y = np.array(y0, dtype=float)
    t = float(t0)
    out = []
    ends = []
    k_out = 0
    while k_out < t_out.size and t_out[k_out] <= t:
        out.append(y.copy())
        k_out += 1
    if steps is not None:
        cache = {}
        for t_next in steps:
            dt = t_next - t
            key = round(dt, 15)
            J = sys.jac(t, y)
            lu = splu((sys.eye - 0.5 * dt * J).tocsc())
            scale = max(np.max(np.abs(y)), 1e-300)
            y_new = _trapezoid_step(sys, t, y, sys.rhs(t, y), dt, lu, scale, 1e-3 * tol)
            if y_new is None:
                raise EvolveError(f"Newton failed in replayed step at t = {t:.6g}")
            y, t = y_new, t_next
            ends.append(t)
            while k_out < t_out.size and abs(t_out[k_out] - t) <= 1e-12 * max(1.0, abs(t)):
                out.append(y.copy())
                k_out += 1
        if k_out != t_out.size:
            raise EvolveError("replayed steps do not reach every output time")
        return np.array(out), ends
    dt = dt0 or 1e-3 * max(t_out[-1] - t0, 1e-12)
    n = 0
    while k_out < t_out.size:
        n += 1
        if n > max_steps:
            raise EvolveError("too many steps")
        target = t_out[k_out]
        dt = min(dt, target - t)
        hit = dt >= target - t - 1e-14 * max(1.0, abs(target))
        if hit:
            dt = target - t
        f0 = sys.rhs(t, y)
        J = sys.jac(t, y)
        scale = max(np.max(np.abs(y)), 1e-300)
        lu_full = splu((sys.eye - 0.5 * dt * J).tocsc())
        lu_half = splu((sys.eye - 0.25 * dt * J).tocsc())
        big = _trapezoid_step(sys, t, y, f0, dt, lu_full, scale, 1e-3 * tol)
        mid = _trapezoid_step(sys, t, y, f0, 0.5 * dt, lu_half, scale, 1e-3 * tol)
        small = None
        if mid is not None:
            small = _trapezoid_step(sys, t + 0.5 * dt, mid, sys.rhs(t + 0.5 * dt, mid), 0.5 * dt, lu_half, scale,
                                    1e-3 * tol)
        if big is None or small is None:
            dt *= 0.25
            if dt < 1e-14 * max(1.0, abs(t)):
                raise EvolveError(f"step size underflow at t = {t:.6g}")
            continue
        err = np.max(np.abs(small - big)) / 3.0 / scale
        if err <= tol:
            # record both half steps so a replay reproduces ``small`` exactly
            ends.append(t + 0.5 * dt)
            t = target if hit else t + dt
            y = small
            ends.append(t)
            if hit:
                out.append(y.copy())
                k_out += 1
                while k_out < t_out.size and t_out[k_out] <= t:
                    out.append(y.copy())
                    k_out += 1
        grow = 0.9 * (tol / err) ** (1.0 / 3.0) if err > 0 else 2.0
        dt = dt * min(2.0, max(0.2, grow))
    return np.array(out), ends


# ------------------------------------------------------------ radial method of lines

def radial_operator(r, f, dim, inner, outer):
    """Matrix of (1/r^{d-1})(r^{d-1} f u_r)_r on all nodes plus boundary data.

    inner: "regular", ("dirichlet", g) or ("flux", q) with q(t) the inward
    strength -S r^{d-1} f u_r; outer: ("dirichlet", g), ("biot", Bi) or
    ("flux", q) with q(t) = -S r^{d-1} f u_r (outward).  Returns
    (L on free nodes, free index, b(t), fixed-node values(t)).
    """
    n = r.size
    rf = _faces(r)
    ff = 0.5 * (f[1:] + f[:-1])
    w = rf ** (dim - 1) * ff / np.diff(r)
    rows, cols, vals = [], [], []
    vol = np.empty(n)
    vol[1:-1] = (rf[1:] ** dim - rf[:-1] ** dim) / dim
    vol[0] = (rf[0] ** dim - r[0] ** dim) / dim
    vol[-1] = (r[-1] ** dim - rf[-1] ** dim) / dim
    for i in range(n - 1):
        for a, b in ((i, i + 1), (i + 1, i)):
            rows += [a, a]
            cols += [b, a]
            vals += [w[i], -w[i]]
    M = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    M = sparse.diags(1.0 / vol) @ M
    area = spatial.SPHERE_AREA[dim]
    fixed = {}
    src = []
    if inner == "regular":
        if r[0] != 0.0:
            raise GridError("regular inner boundary needs r[0] = 0")
    elif inner[0] == "dirichlet":
        fixed[0] = inner[1]
    elif inner[0] == "flux":
        q = inner[1]
        src.append((0, lambda t, q=q: q(t) / area / vol[0]))
    else:
        raise ValueError(f"unknown inner boundary {inner!r}")
    if outer[0] == "dirichlet":
        fixed[n - 1] = outer[1]
    elif outer[0] == "biot":
        M = M.tolil()
        M[n - 1, n - 1] -= r[-1] ** (dim - 1) * f[-1] * outer[1] / vol[-1]
        M = M.tocsr()
    elif outer[0] == "flux":
        q = outer[1]
        src.append((n - 1, lambda t, q=q: -q(t) / area / vol[-1]))
    else:
        raise ValueError(f"unknown outer boundary {outer!r}")
    free = np.array([i for i in range(n) if i not in fixed])
    fixed_idx = np.array(sorted(fixed))
    L = M[free][:, free]
    coupling = M[free][:, fixed_idx] if fixed_idx.size else None
    pos = {j: k for k, j in enumerate(free)}

    def fixed_values(t):
        return np.array([fixed[j](t) for j in fixed_idx])

    def b(t):
        out = np.zeros(free.size)
        if coupling is not None:
            out += coupling @ fixed_values(t)
        for j, fn in src:
            out[pos[j]] += fn(t)
        return out

    return L, free, b, fixed_idx, fixed_values


def scenario_boundaries(s, sol=None):
    """Boundary conditions of a scenario expressed in u for radial_operator."""
    inner, outer = None, None
    lo, hi = s.domain
    for bc in s.boundaries:
        at_inner = math.isclose(bc.r, lo, abs_tol=1e-14)
        if bc.kind == "regular_at_origin":
            cond = "regular"
        elif bc.kind == "dirichlet_zero":
            cond = ("dirichlet", lambda t: 0.0)
        elif bc.kind == "flux":
            cond = ("flux", lambda t, bc=bc: abs(bc.A) * bc.Q * math.exp(bc.A * t))
        elif bc.kind == "biot":
            cond = ("biot", bc.Bi)
        else:
            raise ValueError(f"unknown boundary kind {bc.kind!r}")
        if at_inner:
            inner = cond
        else:
            outer = cond
    if outer is None:
        # truncated exterior domain: hold the exact far-field value
        if sol is None:
            raise EvolveError("exterior scenario needs the exact solution for the far boundary")
        outer = ("dirichlet", lambda t: float(sol.u(hi, t)))
    return inner, outer


@dataclass
class History:
    t: np.ndarray
    r: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    steps: list = field(default_factory=list)


def evolve_nonlinear(s, theta_init, g, t_end=None, t0=None, tol=EVOLVE_TOL, sol=None, boundaries=None,
                     steps=None):
    """Method of lines in u; returns theta and u at g.t (t0 defaults to g.t[0])."""
    r = g.r
    theta_init = np.asarray(theta_init, dtype=float)
    if theta_init.shape != r.shape:
        raise GridError("theta_init must live on the grid nodes")
    t0 = float(g.t[0]) if t0 is None else float(t0)
    t_out = g.t if t_end is None else g.t[g.t <= t_end + 1e-14]
    d = s.diffusivity
    u_init = np.asarray(cs.kirchhoff_u(d, theta_init, s.params.u0)) - s.params.u0
    inner, outer = boundaries or scenario_boundaries(s, sol)
    f = np.asarray(s.hetero.f(r)) if r[0] > 0 else np.ones_like(r)
    L, free, b, fixed_idx, fixed_values = radial_operator(r, f, s.dim, inner, outer)
    growth = math.exp(max(s.params.A, 0.0) * (t_out[-1] - t0))
    u_hi = 1.25 * max(np.max(np.abs(u_init)), 1e-12) * growth
    tables = KirchhoffTables(d, s.reaction, u_hi, u0=s.params.u0)
    sys = _System(L, b, tables)
    outs, ends = integrate(sys, u_init[free], t0, t_out, tol=tol, steps=steps)
    u = np.empty((t_out.size, r.size))
    u[:, free] = outs
    for k, t in enumerate(t_out):
        if fixed_idx.size:
            u[k, fixed_idx] = fixed_values(t)
    tables.check(u[:, free])
    theta = cs.invert_kirchhoff_many(d, u + s.params.u0, s.params.u0)
    return History(t_out, r, u, theta, ends)


def oracle_agreement(s, sol, nr=401, t0=0.0, t_end=None, tol=EVOLVE_TOL):
    """Evolve the exact profile from t0 and compare with e^{At} Phi at t_end (default |A|(t_end - t0) = 1)."""
    t_end = t0 + 1.0 / abs(s.params.A) if t_end is None else t_end
    lo, hi = s.domain
    r = np.linspace(lo, hi, nr)
    g = Grid(r, np.linspace(t0, t_end, 5), s.dim)
    hist = evolve_nonlinear(s, sol.theta(r, t0), g, tol=tol, sol=sol)
    exact = sol.u(r, t_end)
    err = np.max(np.abs(hist.u[-1] - exact)) / np.max(np.abs(exact))
    return float(err), hist


# ------------------------------------------------------------ stability

@dataclass(frozen=True)
class StabilityVerdict:
    passed: bool
    group: float
    threshold: float
    margin: float


def stability_threshold(lam01=None, lam11=None):
    lam01 = lam01 if lam01 is not None else specfun.bessel_zero(0, 1).value
    lam11 = lam11 if lam11 is not None else specfun.bessel_zero(1, 1).value
    return math.e ** 2 * ((lam11 / lam01) ** 2 - 1.0) / 4.0


def stability_criterion(R0_phys, r1, B, D0, dim2_zeros=None):
    """Sufficient condition R0 r1^2/(B lambda01^2 D0) < e^2 [(lambda11/lambda01)^2 - 1]/4."""
    for name, val in (("R0", R0_phys), ("r1", r1), ("B", B), ("D0", D0)):
        if not val > 0:
            raise ValueError(f"{name} must be positive")
    lam01, lam11 = dim2_zeros or (specfun.bessel_zero(0, 1).value, specfun.bessel_zero(1, 1).value)
    group = R0_phys * r1 ** 2 / (B * lam01 ** 2 * D0)
    thr = stability_threshold(lam01, lam11)
    return StabilityVerdict(group < thr, group, thr, thr - group)


def polar_operator(N, M, r1):
    """5-point Laplacian on cell centres r_i = (i+1/2)h, phi_j = 2 pi j/M, u = 0 at r1 = (N+1/2)h."""
    h = r1 / (N + 0.5)
    r = (np.arange(N) + 0.5) * h
    dphi = 2 * np.pi / M
    rf_out = r + 0.5 * h
    rf_in = r - 0.5 * h
    rows, cols, vals = [], [], []

    def idx(i, j):
        return i * M + (j % M)

    for i in range(N):
        a_out = rf_out[i] / (r[i] * h * h)
        a_in = rf_in[i] / (r[i] * h * h)
        a_ang = 1.0 / (r[i] * r[i] * dphi * dphi)
        for j in range(M):
            k = idx(i, j)
            rows.append(k); cols.append(k); vals.append(-(a_out + a_in + 2 * a_ang))
            if i + 1 < N:
                rows.append(k); cols.append(idx(i + 1, j)); vals.append(a_out)
            if i > 0:
                rows.append(k); cols.append(idx(i - 1, j)); vals.append(a_in)
            rows.append(k); cols.append(idx(i, j + 1)); vals.append(a_ang)
            rows.append(k); cols.append(idx(i, j - 1)); vals.append(a_ang)
    L = sparse.csr_matrix((vals, (rows, cols)), shape=(N * M, N * M))
    phi = np.arange(M) * dphi
    return L, r, phi


@dataclass
class DecayRow:
    n: int
    m: int
    lam: float
    eps: float
    rate: float
    r2: float
    bound_rate: float
    linear_rate: float
    comparison_excess: float
    monotone: bool
    verdict: str


@dataclass
class DecayTable:
    R0: float
    grid: tuple
    rows: list
    criterion: StabilityVerdict
    t: np.ndarray = None
    norms: dict = field(default_factory=dict)

    def header(self):
        return ["n", "m", "lambda_nm", "eps", "fitted_rate", "r_squared", "bound_rate", "linear_rate_D0",
                "comparison_excess", "monotone", "verdict"]

    def as_rows(self):
        return [[w.n, w.m, w.lam, w.eps, w.rate, w.r2, w.bound_rate, w.linear_rate, w.comparison_excess,
                 int(w.monotone), w.verdict] for w in self.rows]


def _fit_rate(t, norm):
    """Least-squares slope of ln|w| after it has dropped by one e-fold."""
    start = np.nonzero(norm <= norm[0] / math.e)[0]
    i0 = int(start[0]) if start.size else 0
    tt, yy = t[i0:], np.log(norm[i0:])
    if tt.size < 3:
        tt, yy = t, np.log(norm)
    slope, icept = np.polyfit(tt, yy, 1)
    fit = slope * tt + icept
    ss_res = float(np.sum((yy - fit) ** 2))
    ss_tot = float(np.sum((yy - yy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return float(slope), r2


def stability_experiment(R0=1.0, eps=1e-3, modes=((1, 1),), nr=128, nphi=64, t_end=3.0, n_out=31,
                         tol=EVOLVE_TOL, build=None):
    """Seed J_n(lambda_nm r/r1) cos(n phi) perturbations on the similarity solution and fit their decay.

    Works in the dimensionless disk r1 = lambda_01 (kappa = 1, A = -1).  The
    perturbation is w = (u_pert - u_base) e^{t}; the base run is adaptive and
    every perturbed run replays its steps.
    """
    if not 0 <= eps <= 1e-2:
        raise ValueError("eps must lie in [0, 1e-2]")
    lam01 = specfun.bessel_zero(0, 1).value
    r1 = lam01
    s = scn.preset(3, overrides={"R0": float(R0), "r1": r1})
    if build is not None:
        s.diffusivity = build
    L, r, phi = polar_operator(nr, nphi, r1)
    rr, pp = np.meshgrid(r, phi, indexing="ij")
    base0 = specfun.bessel_family("J0", rr).ravel()
    tables = KirchhoffTables(s.diffusivity, s.reaction, 1.25 * (1.0 + eps))
    zero = np.zeros(nr * nphi)
    sys = _System(L, lambda t: zero, tables)
    t_out = np.linspace(0.0, t_end, n_out)
    base, steps = integrate(sys, base0, 0.0, t_out, tol=tol)
    dm = dsolve.dm_bound(R0)
    crit = stability_criterion(R0 * 1.0, r1, 1.0, 1.0)
    rows, norms = [], {}
    growth = np.exp(t_out)[:, None]
    # the neutral (0,1) direction only shifts the similarity amplitude; it is
    # removed from w so second-order feeding into it does not mask the decay
    area = np.repeat(r, nphi)
    neutral = base0 / math.sqrt(float(base0 @ (area * base0)))
    for n, m in modes:
        lam = specfun.bessel_zero(n, m).value
        seed = (specfun.bessel_jn(n, lam * rr / r1) * np.cos(n * pp)).ravel()
        pert, _ = integrate(sys, base0 + eps * seed, 0.0, t_out, steps=steps)
        w = (pert - base) * growth
        if (n, m) != (0, 1):
            w = w - np.outer(w @ (area * neutral), neutral)
        norm = np.max(np.abs(w), axis=1)
        norms[(n, m)] = norm
        bound = dm - (lam / lam01) ** 2
        linear = 1.0 - (lam / lam01) ** 2
        q_amp = eps * np.exp(bound * t_out)[:, None] * np.abs(seed)[None, :]
        q_max = eps * np.max(np.abs(seed)) * np.exp(bound * t_out)
        excess = float(np.max((np.abs(w) - q_amp) / q_max[:, None])) if eps > 0 else 0.0
        if eps == 0 or norm[0] == 0:
            rows.append(DecayRow(n, m, lam, eps, 0.0, 1.0, bound, linear, excess, True, "zero"))
            continue
        if n == 0 and m == 1:
            drift = float(np.max(np.abs(norm / norm[0] - 1.0)))
            verdict = "similarity" if drift < 1e-2 else "inconclusive"
            rate, r2 = _fit_rate(t_out, norm) if drift >= 1e-2 else (0.0, 1.0)
            rows.append(DecayRow(n, m, lam, eps, rate, r2, bound, linear, excess, True, verdict))
            continue
        rate, r2 = _fit_rate(t_out, norm)
        monotone = bool(np.all(np.diff(norm) < 0))
        if r2 < 0.99:
            verdict = "inconclusive"
        elif rate <= bound + RATE_SLACK * abs(bound) and excess <= COMPARISON_SLACK and monotone:
            verdict = "pass"
        else:
            verdict = "fail"
        rows.append(DecayRow(n, m, lam, eps, rate, r2, bound, linear, excess, monotone, verdict))
    return DecayTable(float(R0), (nr, nphi), rows, crit, t_out, norms)
