"""Separable space-time solutions u = e^{At} Phi(r), their temperatures and the presets.

Preset numbers live in ``data/presets.json``; a scenario file is a small JSON
document naming a preset (plus overrides) or an explicit table row.
"""
import copy
import functools
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import optimize

from . import construct as cs
from . import dsolve, spatial

SCENARIO_SCHEMA = "arrhenius-rd/scenario"
SCENARIO_VERSION = 1
_TOP_KEYS = {"schema", "version", "preset", "variant", "overrides", "explicit", "domain", "grid", "times", "outputs"}
_EXPLICIT_KEYS = {"row", "row_params", "A", "kappa", "dim", "domain", "amplitude", "c2", "c3", "t_range",
                  "compat_range"}
OUTPUTS = ("theta", "u", "flux")


class ScenarioError(ValueError):
    pass


@functools.lru_cache(maxsize=1)
def _preset_doc():
    text = resources.files("arrhenius_rd").joinpath("data/presets.json").read_text()
    doc = json.loads(text)
    if doc.get("schema") != "arrhenius-rd/presets" or doc.get("version") != 1:
        raise ScenarioError("unsupported presets file")
    return doc


def preset_config(pid, variant=None, overrides=None):
    """Resolved numeric defaults for a preset; unknown override keys are rejected."""
    entry = _preset_doc()["presets"].get(str(pid))
    if entry is None:
        raise ScenarioError(f"no preset {pid!r}; valid ids are 1..7")
    cfg = copy.deepcopy(entry["defaults"])
    if "variants" in entry:
        variant = variant or entry["default_variant"]
        if variant not in entry["variants"]:
            raise ScenarioError(f"preset {pid} has no variant {variant!r}; choose from {sorted(entry['variants'])}")
        cfg.update(entry["variants"][variant])
    elif variant is not None:
        raise ScenarioError(f"preset {pid} has no variants")
    for key, val in (overrides or {}).items():
        if key not in cfg:
            raise ScenarioError(f"unknown key {key!r} for preset {pid}")
        cfg[key] = val
    return cfg, variant


def canonical_hash(doc):
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@functools.lru_cache(maxsize=8)
def _build(R0, theta_max, tol):
    return dsolve.build_diffusivity(R0=R0, theta_max=theta_max, tol=tol)


# ------------------------------------------------------------ scenario

@dataclass
class Scenario:
    params: cs.SymmetryParams
    diffusivity: object
    reaction: object
    profile: spatial.SpatialProfile
    boundaries: list
    domain: tuple
    dim: int
    preset_id: int = None
    variant: str = None
    amplitude: float = 1.0
    t_range: tuple = (0.0, 1.0)
    times: tuple = ()
    residual_window: tuple = None
    compat_range: tuple = (0.05, 5.0)
    grid_kind: str = "uniform"
    config: dict = field(default_factory=dict)

    @property
    def hetero(self):
        return self.profile.hetero

    @property
    def window(self):
        return tuple(self.residual_window) if self.residual_window else tuple(self.domain)

    def compat_thetas(self, n=32):
        return np.linspace(self.compat_range[0], self.compat_range[1], n)

    def describe(self):
        return {
            "preset": self.preset_id, "variant": self.variant, "config": self.config,
            "params": self.params.to_dict(), "diffusivity": _meta_of(self.diffusivity),
            "reaction": self.reaction.to_dict(), "profile": self.profile.to_dict(),
            "boundaries": [b.to_dict() for b in self.boundaries], "domain": list(self.domain),
            "dim": self.dim, "amplitude": self.amplitude,
        }

    @property
    def hash(self):
        return canonical_hash(self.describe())


def _meta_of(d):
    # builds are identified by their recipe, not their coefficients
    if isinstance(d, dsolve.PiecewiseDiffusivity):
        return {"kind": d.kind, **d.meta, "theta_max": d.theta_max}
    if isinstance(d, cs.ScaledDiffusivity):
        return {"kind": d.kind, "factor": d.factor, "base": _meta_of(d.base)}
    return d.to_dict()


# ------------------------------------------------------------ solution

class Solution:
    """u(r, t) = amplitude e^{At} Phi(r); theta by inverse Kirchhoff; flux = -u_r."""

    def __init__(self, scenario, meta):
        self.scenario = scenario
        self.meta = dict(meta)
        self._A = scenario.params.A
        self._amp = scenario.amplitude

    def time_factor(self, t):
        return self._amp * np.exp(self._A * np.asarray(t, dtype=float))

    def u(self, r, t):
        return self.time_factor(t) * np.asarray(self.scenario.profile(r))

    def u_r(self, r, t):
        return self.time_factor(t) * np.asarray(self.scenario.profile.derivative(r))

    def flux(self, r, t):
        return -self.u_r(r, t)

    def theta(self, r, t):
        u = np.asarray(self.u(r, t), dtype=float)
        return cs.invert_kirchhoff_many(self.scenario.diffusivity, u, self.scenario.params.u0)


def assemble(s, check=True):
    """Check the scenario invariants and return its Solution.

    ``check=False`` skips the compatibility test (used to feed deliberately
    broken pairs to the residual checker).
    """
    if not math.isclose(s.profile.kappa, s.params.kappa, rel_tol=1e-12, abs_tol=1e-15):
        raise cs.CompatibilityError(f"profile kappa {s.profile.kappa} != params kappa {s.params.kappa}")
    worst = None
    if check:
        worst = cs.check_compatible(s.diffusivity, s.reaction, s.params, s.compat_thetas())
    lo, hi = s.domain
    r = np.linspace(lo, hi, 513)
    if lo == 0.0 and s.profile.family not in ("cos", "J0", "j0"):
        r = r[1:]
    phi = s.amplitude * np.asarray(s.profile(r))
    if np.min(phi) < -1e-12 * np.max(np.abs(phi)):
        raise spatial.ProfileError("the profile changes sign on the domain; temperatures would be negative")
    meta = {"scenario_hash": s.hash, "compatibility": worst}
    if isinstance(s.diffusivity, dsolve.PiecewiseDiffusivity):
        meta["build"] = _meta_of(s.diffusivity)
    return Solution(s, meta)


# ------------------------------------------------------------ isotherms

def isotherm_radius(sol, theta_star, t):
    """r with theta(r, t) = theta_star, or None when the level is not attained."""
    if theta_star < 0:
        return None
    s = sol.scenario
    u_star = float(cs.kirchhoff_u(s.diffusivity, theta_star, s.params.u0)) if theta_star > 0 else s.params.u0
    phi_star = u_star / float(sol.time_factor(t))
    prof = s.profile
    lo, hi = s.domain
    if prof.kappa == 0 and prof.family in ("log", "inverse"):
        c2, c3 = prof.coefficients["c2"], prof.coefficients["c3"]
        # profile convention: Phi = c2 - c3 ln r (dim 2) or c2 - c3/r (dim 3)
        if prof.family == "log":
            r = math.exp((c2 - phi_star) / c3)
        else:
            if c2 == phi_star:
                return None
            r = c3 / (c2 - phi_star)
        slack = 1e-12 * (hi - lo)
        if lo - slack <= r <= hi + slack:
            return min(max(r, lo), hi)
        return None
    return isotherm_radius_bracketed(sol, theta_star, t)


def isotherm_radius_bracketed(sol, theta_star, t, n=2001):
    """Scan Phi on the domain for the level u*/e^{At} and polish with brentq."""
    s = sol.scenario
    u_star = float(cs.kirchhoff_u(s.diffusivity, theta_star, s.params.u0)) if theta_star > 0 else s.params.u0
    phi_star = u_star / float(sol.time_factor(t))
    lo, hi = s.domain
    if not math.isfinite(hi):
        return None
    r = np.linspace(lo, hi, n)
    g = np.asarray(s.profile(r)) - phi_star
    if g[-1] == 0.0:
        return float(r[-1])
    hit = np.nonzero(g[:-1] * g[1:] <= 0)[0]
    if hit.size == 0:
        return None
    i = int(hit[0])
    if g[i] == 0.0:
        return float(r[i])
    fn = lambda x: float(s.profile(x)) - phi_star
    return optimize.brentq(fn, r[i], r[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ------------------------------------------------------------ presets

def _normalized(profile, domain, amplitude):
    # scale so that the largest |Phi| on the domain is +amplitude
    r = np.linspace(domain[0], domain[1], 2001)
    vals = np.asarray(profile(r))
    peak = vals[np.argmax(np.abs(vals))]
    return profile.scaled(amplitude / peak)


def _wire_flux(profile, dim, r0, A, f0=1.0):
    # Q such that -S r0^{d-1} f Phi'(r0) = |A| Q
    q = -spatial.SPHERE_AREA[dim] * r0 ** (dim - 1) * f0 * float(profile.derivative(r0)) / abs(A)
    return spatial.BoundarySpec("flux", dim, r=r0, Q=q, A=A)


def _kappa0_arrhenius(cfg):
    p = cs.SymmetryParams(A=cfg["A"], kappa=0.0, c1=cfg["c1"])
    d = cs.ArrheniusKappa0(cfg["R0"], cfg["B"], cfg["A"], cfg["c1"])
    r = cs.Arrhenius(cfg["R0"], cfg["B"])
    return p, d, r


def _built_pair(cfg, K):
    """Dimensionless build rescaled to kappa = K^2, A = -K^2 D0 (length scale 1/K)."""
    base = _build(float(cfg["R0"]), float(cfg["theta_max"]), float(cfg["build_tol"]))
    d = dsolve.PhysicalDiffusivity(base, cfg["D0"], cfg["B"]) if (cfg["D0"], cfg["B"]) != (1.0, 1.0) else base
    kappa = K * K
    p = cs.SymmetryParams(A=-kappa * cfg["D0"], kappa=kappa)
    r = cs.Arrhenius(kappa * cfg["D0"] * cfg["B"] * cfg["R0"], cfg["B"])
    return p, d, r


def preset(pid, variant=None, overrides=None):
    cfg, variant = preset_config(pid, variant, overrides)
    pid = int(pid)
    common = dict(preset_id=pid, variant=variant, config=cfg, t_range=tuple(cfg["t_range"]),
                  compat_range=tuple(cfg["compat_range"]), grid_kind=cfg.get("grid", "uniform"))
    if pid in (1, 2):
        dim = cfg["dim"]
        p, d, r = _kappa0_arrhenius(cfg)
        prof = spatial.fit_flux(dim, cfg["r0"], cfg["r1"], cfg["Q"], cfg["A"])
        bcs = [spatial.BoundarySpec("dirichlet_zero", dim, r=cfg["r1"]),
               spatial.BoundarySpec("flux", dim, r=cfg["r0"], Q=cfg["Q"], A=cfg["A"])]
        return Scenario(p, d, r, prof, bcs, (cfg["r0"], cfg["r1"]), dim,
                        residual_window=tuple(cfg["residual_window"]), **common)
    if pid == 3:
        K = spatial.fit_dirichlet(cfg["dim"], cfg["r1"])
        p, d, r = _built_pair(cfg, K)
        prof = spatial.phi_radial(p.kappa, cfg["dim"], K=K)
        times = tuple(x / abs(p.A) for x in cfg["times_abs_At"])
        common["t_range"] = tuple(x / abs(p.A) for x in cfg["t_range"])
        bcs = [spatial.BoundarySpec("regular_at_origin", cfg["dim"], r=0.0),
               spatial.BoundarySpec("dirichlet_zero", cfg["dim"], r=cfg["r1"])]
        return Scenario(p, d, r, prof, bcs, (0.0, cfg["r1"]), cfg["dim"], amplitude=cfg["amplitude"],
                        times=times, **common)
    if pid == 4:
        K, A = cfg["K"], cfg["A"]
        p = cs.SymmetryParams(A=A, kappa=-K * K)
        d = cs.Exponential()
        r = cs.CompatibleReaction(d, p)
        dom = (cfg["r0"], cfg["r_max"])
        prof = spatial.phi_radial(p.kappa, cfg["dim"], K=K, r_min=dom[0], r_max=dom[1])
        prof = prof.scaled(1.0 / float(prof(dom[0])))
        bcs = [_wire_flux(prof.scaled(cfg["amplitude"]), cfg["dim"], dom[0], A)]
        return Scenario(p, d, r, prof, bcs, dom, cfg["dim"], amplitude=cfg["amplitude"],
                        **common)
    if pid == 5:
        p, d, r = _kappa0_arrhenius(cfg)
        c1 = abs(cfg["A"]) * cfg["Q"] / (2 * math.pi)
        prof = spatial.hetero_phi("square", 0.0, {"r0": cfg["r0"], "r1": cfg["r1"], "c1": c1})
        bcs = [spatial.BoundarySpec("dirichlet_zero", 2, r=cfg["r1"]),
               spatial.BoundarySpec("flux", 2, r=cfg["r0"], Q=cfg["Q"], A=cfg["A"])]
        return Scenario(p, d, r, prof, bcs, (cfg["r0"], cfg["r1"]), 2,
                        residual_window=tuple(cfg["residual_window"]), **common)
    if pid == 6:
        K = cfg["K"]
        p, d, r = _built_pair(cfg, K)
        dom = (cfg["r0"], cfg["r1"])
        prof = spatial.hetero_phi(cfg["f"], p.kappa, {"r0": cfg["r0"], "r1": cfg["r1"], "K": K})
        prof = _normalized(prof, dom, 1.0)
        f0 = float(prof.hetero.f(dom[0]))
        bcs = [_wire_flux(prof.scaled(cfg["amplitude"]), 2, dom[0], p.A, f0),
               spatial.BoundarySpec("dirichlet_zero", 2, r=dom[1])]
        return Scenario(p, d, r, prof, bcs, dom, 2, amplitude=cfg["amplitude"], **common)
    if pid == 7:
        K, A = cfg["K"], cfg["A"]
        p = cs.SymmetryParams(A=A, kappa=-K * K)
        d = cs.Exponential()
        r = cs.CompatibleReaction(d, p)
        dom = (cfg["r0"], cfg["r_max"])
        prof = spatial.hetero_phi(cfg["f"], p.kappa, {"r0": cfg["r0"], "r1": cfg["r_max"], "K": K})
        prof = prof.scaled(1.0 / float(prof(dom[0])))
        f0 = float(prof.hetero.f(dom[0]))
        bcs = [_wire_flux(prof.scaled(cfg["amplitude"]), 2, dom[0], A, f0)]
        return Scenario(p, d, r, prof, bcs, dom, 2, amplitude=cfg["amplitude"], **common)
    raise ScenarioError(f"no preset {pid!r}")


def all_presets():
    """Every preset and variant, in order."""
    out = []
    for pid in range(1, 8):
        entry = _preset_doc()["presets"][str(pid)]
        for v in (entry.get("variants") or {None: None}):
            out.append(preset(pid, v))
    return out


# ------------------------------------------------------------ scenario files

def _explicit(spec):
    bad = set(spec) - _EXPLICIT_KEYS
    if bad:
        raise ScenarioError(f"unknown explicit keys {sorted(bad)}")
    for key in ("row", "A", "kappa", "dim", "domain"):
        if key not in spec:
            raise ScenarioError(f"explicit scenario needs {key!r}")
    p = cs.SymmetryParams(A=float(spec["A"]), kappa=float(spec["kappa"]))
    if spec["row"] == "c":
        raise ScenarioError("row c is not used for scenarios: its printed reaction is not compatible")
    d, r = cs.catalogue_pair(spec["row"], spec.get("row_params"), p, form="printed")
    dim = int(spec["dim"])
    lo, hi = (float(x) for x in spec["domain"])
    prof = spatial.phi_radial(p.kappa, dim, c2=float(spec.get("c2", 0.0)), c3=float(spec.get("c3", 1.0)),
                              r_min=lo, r_max=hi)
    return Scenario(p, d, r, prof, [], (lo, hi), dim, amplitude=float(spec.get("amplitude", 1.0)),
                    t_range=tuple(spec.get("t_range", (0.0, 1.0))),
                    compat_range=tuple(spec.get("compat_range", (0.05, 5.0))),
                    config={"explicit": spec})


def load_scenario(source):
    """Scenario from a JSON path, JSON text or dict.  Returns (scenario, document, hash)."""
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        doc = json.loads(text)
    bad = set(doc) - _TOP_KEYS
    if bad:
        raise ScenarioError(f"unknown scenario keys {sorted(bad)}")
    if doc.get("schema") != SCENARIO_SCHEMA:
        raise ScenarioError(f"schema must be {SCENARIO_SCHEMA!r}")
    if doc.get("version") != SCENARIO_VERSION:
        raise ScenarioError(f"unsupported scenario version {doc.get('version')!r}")
    if ("preset" in doc) == ("explicit" in doc):
        raise ScenarioError("give exactly one of 'preset' or 'explicit'")
    if "preset" in doc:
        s = preset(doc["preset"], doc.get("variant"), doc.get("overrides"))
    else:
        s = _explicit(doc["explicit"])
    if "domain" in doc:
        lo, hi = (float(x) for x in doc["domain"])
        if lo < s.domain[0] or hi > s.domain[1] or not lo < hi:
            raise ScenarioError(f"domain {doc['domain']} is not inside {list(s.domain)}")
        s.domain = (lo, hi)
    if "times" in doc:
        s.times = tuple(float(x) for x in doc["times"])
    outs = doc.get("outputs", list(OUTPUTS))
    if set(outs) - set(OUTPUTS):
        raise ScenarioError(f"outputs must be among {OUTPUTS}")
    grid = doc.get("grid", {})
    if set(grid) - {"nr", "nt"}:
        raise ScenarioError("grid takes only nr and nt")
    return s, doc, canonical_hash(doc)
