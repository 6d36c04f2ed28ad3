"""Time the hot kernels on the numba and pure-numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 200000]

Each kernel is warmed once (so numba compile time is excluded) and the best
of ``--repeat`` runs is reported, together with the largest relative
difference between the two backends.
"""
import argparse
import math
import timeit

import numpy as np

from arrhenius_rd import _accel, dsolve, kernels
from arrhenius_rd import scenario as scn
from arrhenius_rd import verify as vf


def cases(n):
    rng = np.random.default_rng(0)
    x = rng.uniform(0.1, 80.0, n)
    rows = cols = 24
    table = np.zeros((rows, cols + 1))
    table[0, :] = [(-1) ** m * math.factorial(m) for m in range(cols + 1)]
    table[:, 0] = [1.0 / (r + 1) for r in range(rows)]
    rho = dsolve.rho_coefficients(0.5, 1.0, 60)
    c = rng.normal(size=40)
    y = np.linspace(-0.5, 0.5, n)
    g = np.cos(np.linspace(0, 2, n))
    r = np.linspace(0.5, 2.0, n)
    w = 1 + 0.25 * (r[1:] + r[:-1])
    q = r ** 3
    return {
        "ei_scaled": lambda: kernels.ei_scaled(x),
        "e1_scaled": lambda: kernels.e1_scaled(x),
        "q_fill 24x25": lambda: kernels.q_fill(table, -1, 1.0),
        "taylor 60 terms": lambda: kernels.taylor_coefficients(0.5558, rho, -1.0, 0.5, 0.5558 - math.exp(-2.0), 60),
        "horner deg 39": lambda: kernels.horner(c, y),
        "cumulative_integral": lambda: kernels.cumulative_integral(g, 2.0 / (n - 1)),
        "radial_divergence": lambda: kernels.radial_divergence(r, w, q, 2),
    }


def end_to_end():
    s = scn.preset(3)
    sol = scn.assemble(s)
    g = vf.grid_for(s, 400, 64)
    return {
        "build_diffusivity": lambda: dsolve.build_diffusivity(R0=1.0),
        "pde_residual preset 3": lambda: vf.pde_residual(sol, s, g),
    }


def best(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def gap(a, b):
    a = np.concatenate([np.ravel(v) for v in a]) if isinstance(a, tuple) else np.ravel(a)
    b = np.concatenate([np.ravel(v) for v in b]) if isinstance(b, tuple) else np.ravel(b)
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--no-e2e", action="store_true", help="skip the end-to-end timings")
    args = ap.parse_args()

    start = _accel.backend()
    print(f"{'kernel':<24}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}{'max rel diff':>15}")
    for name, fn in cases(args.size).items():
        out, times = {}, {}
        for be in ("numba", "numpy"):
            _accel.set_backend(be)
            out[be] = fn()
            times[be] = best(fn, args.repeat)
        print(f"{name:<24}{1e3 * times['numba']:>12.3f}{1e3 * times['numpy']:>12.3f}"
              f"{times['numpy'] / times['numba']:>10.1f}{gap(out['numba'], out['numpy']):>15.1e}")
    if not args.no_e2e:
        for name, fn in end_to_end().items():
            times = {}
            for be in ("numba", "numpy"):
                _accel.set_backend(be)
                times[be] = best(fn, max(1, args.repeat // 2))
            print(f"{name:<24}{1e3 * times['numba']:>12.1f}{1e3 * times['numpy']:>12.1f}"
                  f"{times['numpy'] / times['numba']:>10.1f}{'':>15}")
    _accel.set_backend(start)


if __name__ == "__main__":
    main()
