"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once untimed (numba compile / cache load), then ``repeat``
times; the best time is reported with the max deviation between backends.
"""
import argparse
import time

import numpy as np

from vwbeam import kernels
from vwbeam.distmodel import Constant, Dirac, expr
from vwbeam.femcore import BAND, QuadratureSpec, assemble, build_space, element_matrices
from vwbeam.mollify import _LOG_NODES, _LOG_WEIGHTS, MollifierNet, mollify_expr, separable_mollify_2d


def _system(n):
    net = MollifierNet(0.05)
    c = mollify_expr(expr(Constant(1.0), Dirac(0.5)), net)
    one = separable_mollify_2d(expr(Constant(1.0), arity="xt"), None)
    return assemble(c, one, one, build_space(n))


def cases(n, m):
    mesh = build_space(n)
    xi, w = QuadratureSpec(panels=4).local_rule(mesh.h, None)
    ke = np.ascontiguousarray(element_matrices(mesh, 1.0, w, xi, "bending"))
    sys = _system(n)
    x = np.random.default_rng(0).standard_normal(sys.size)
    dt = 1.0 / m
    eff = (sys.M * (4.0 / dt**2) + sys.Kc).ab
    loads = np.ascontiguousarray(sys.loads(np.linspace(0, 1, m + 1)))
    z = np.zeros(sys.size)
    xs = np.linspace(0.0, 1.0, 10_000)
    return {
        "scatter_elements": lambda k: k.scatter_elements(np.zeros((2 * BAND + 1, mesh.dof_count)),
                                                         ke, BAND),
        "band_matvec": lambda k: k.band_matvec(sys.Kc.ab, BAND, BAND, x),
        "band_lu_solve": lambda k: k.band_lu_solve(k.band_lu_factor(eff, BAND, BAND),
                                                   BAND, BAND, x),
        "newmark_constant": lambda k: k.newmark_constant(sys.M.ab, eff, BAND, BAND, loads,
                                                         z, z, z, dt, 0.25, 0.5)[0],
        "neglog_convolve": lambda k: k.neglog_convolve(xs, 0.5, 0.05, _LOG_NODES, _LOG_WEIGHTS),
    }


def best_time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--m", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"numba available: {kernels.NUMBA_AVAILABLE}  (n={args.n}, m={args.m})")
    print(f"{'kernel':<18} {'numpy [ms]':>11} {kernels.numba_impl.name + ' [ms]':>13} "
          f"{'speedup':>8} {'max diff':>10}")
    for name, fn in cases(args.n, args.m).items():
        ref = np.asarray(fn(kernels.numpy_impl))
        got = np.asarray(fn(kernels.numba_impl))
        diff = float(np.max(np.abs(ref - got)) / max(1.0, np.max(np.abs(ref))))
        t_np = best_time(lambda: fn(kernels.numpy_impl), args.repeat)
        t_nb = best_time(lambda: fn(kernels.numba_impl), args.repeat)
        print(f"{name:<18} {1e3 * t_np:>11.3f} {1e3 * t_nb:>13.3f} {t_np / t_nb:>8.1f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
