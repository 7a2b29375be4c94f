"""Hot numeric loops, each with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and ``VWBEAM_NUMBA`` is
not set to ``0``.  Both paths are always importable so the benchmark and the
test suite can compare them directly (``kernels.numba_impl`` /
``kernels.numpy_impl``).

Band storage follows LAPACK's general-band layout: ``ab[u + i - j, j] = A[i, j]``
with ``l`` sub- and ``u`` super-diagonals.
"""
import math
import os
from types import SimpleNamespace

import numpy as np
import scipy.linalg

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("VWBEAM_NUMBA", "1") != "0"

# unit-mollifier normalizer, duplicated here so kernels stay self-contained;
# mollify.compute_normalizer() re-derives it and the tests compare both
_A_STD = 2.2522836210435817


class SingularPivotError(ArithmeticError):
    pass


def graded_nodes(n_gauss=16, n_panels=30, ratio=2.0, outer_split=8, outer_width=0.1):
    """Quadrature nodes/weights on (0, 1], geometrically graded toward 0.

    Panels are [ratio^-(k+1), ratio^-k] for k < n_panels - 1 plus the innermost
    panel [0, ratio^-(n_panels-1)]; panels wider than ``outer_width`` are split
    into ``outer_split`` equal pieces so the mollifier bump far from the
    singular point is resolved too.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    edges = [ratio ** (-k) for k in range(n_panels)] + [0.0]
    nodes, weights = [], []
    for hi, lo in zip(edges[:-1], edges[1:]):
        pieces = outer_split if hi - lo > outer_width else 1
        sub = np.linspace(lo, hi, pieces + 1)
        for a, b in zip(sub[:-1], sub[1:]):
            half = 0.5 * (b - a)
            nodes.append(a + half * (xg + 1.0))
            weights.append(half * wg)
    return np.concatenate(nodes), np.concatenate(weights)


# ---------------------------------------------------------------------------
# numpy implementations


def _scatter_elements_np(ab, ke, u):
    n_el = ke.shape[0]
    a = np.arange(4)
    i = 2 * np.arange(n_el)[:, None, None] + a[None, :, None]
    j = 2 * np.arange(n_el)[:, None, None] + a[None, None, :]
    i, j = np.broadcast_arrays(i, j)
    np.add.at(ab, (u + i - j, j), ke)
    return ab


def _band_matvec_np(ab, l, u, x):
    n = x.shape[0]
    y = np.zeros(n)
    for k in range(l + u + 1):
        d = k - u  # row offset i - j
        if d >= 0:
            y[d:] += ab[k, : n - d] * x[: n - d]
        else:
            y[: n + d] += ab[k, -d:] * x[-d:]
    return y


def _band_lu_factor_np(ab, l, u):
    # the numpy path hands the band to LAPACK at solve time
    return np.array(ab, dtype=float, copy=True)


def _band_lu_solve_np(lu, l, u, b):
    return scipy.linalg.solve_banded((l, u), lu, b, check_finite=False)


def _newmark_constant_np(m_ab, eff_ab, l, u, loads, u0, v0, a0, dt, beta, gamma):
    nsteps = loads.shape[0] - 1
    n = u0.shape[0]
    U = np.empty((nsteps + 1, n))
    V = np.empty((nsteps + 1, n))
    A = np.empty((nsteps + 1, n))
    U[0], V[0], A[0] = u0, v0, a0
    c0 = 1.0 / (beta * dt * dt)
    c2 = 1.0 / (beta * dt)
    c3 = 1.0 / (2.0 * beta) - 1.0
    for i in range(nsteps):
        rhs = loads[i + 1] + _band_matvec_np(m_ab, l, u, c0 * U[i] + c2 * V[i] + c3 * A[i])
        un = scipy.linalg.solve_banded((l, u), eff_ab, rhs, check_finite=False)
        an = c0 * (un - U[i]) - c2 * V[i] - c3 * A[i]
        U[i + 1] = un
        A[i + 1] = an
        V[i + 1] = V[i] + dt * ((1.0 - gamma) * A[i] + gamma * an)
    return U, V, A


def _neglog_convolve_np(x, x0, eps, rnodes, rweights):
    x = np.asarray(x, dtype=float)
    s = np.clip(x - x0, -eps, eps)  # singular point of y -> -log|x - y - x0|
    left = (s + eps)[:, None]
    right = (eps - s)[:, None]
    y = np.concatenate([s[:, None] - left * rnodes, s[:, None] + right * rnodes], axis=1)
    w = np.concatenate([left * rweights, right * rweights], axis=1)
    z = y / eps
    inside = np.abs(z) < 1.0
    zz = np.where(inside, z, 0.0)
    phi = np.where(inside, _A_STD * np.exp(-1.0 / (1.0 - zz * zz)) / eps, 0.0)
    arg = np.abs(x[:, None] - y - x0)
    with np.errstate(divide="ignore"):
        f = np.where(arg > 0.0, -np.log(np.where(arg > 0.0, arg, 1.0)), 0.0)
    return (w * phi * f).sum(axis=1)


numpy_impl = SimpleNamespace(
    scatter_elements=_scatter_elements_np,
    band_matvec=_band_matvec_np,
    band_lu_factor=_band_lu_factor_np,
    band_lu_solve=_band_lu_solve_np,
    newmark_constant=_newmark_constant_np,
    neglog_convolve=_neglog_convolve_np,
    name="numpy",
)


# ---------------------------------------------------------------------------
# loop implementations (compiled by numba when available)


def _scatter_elements_loop(ab, ke, u):
    n_el = ke.shape[0]
    for e in range(n_el):
        for a in range(4):
            i = 2 * e + a
            for b in range(4):
                j = 2 * e + b
                ab[u + i - j, j] += ke[e, a, b]
    return ab


def _band_matvec_loop(ab, l, u, x):
    n = x.shape[0]
    y = np.zeros(n)
    for j in range(n):
        xj = x[j]
        i0 = max(0, j - u)
        i1 = min(n - 1, j + l)
        for i in range(i0, i1 + 1):
            y[i] += ab[u + i - j, j] * xj
    return y


def _band_lu_factor_loop(ab, l, u):
    # Doolittle without pivoting; stays inside the band.  Safe here because
    # the effective Newmark matrix is dominated by its SPD part.
    lu = ab.copy()
    n = lu.shape[1]
    for k in range(n):
        piv = lu[u, k]
        if piv == 0.0 or not math.isfinite(piv):
            raise SingularPivotError("zero or non-finite pivot in band LU")
        for i in range(k + 1, min(n - 1, k + l) + 1):
            lu[u + i - k, k] /= piv
            lik = lu[u + i - k, k]
            for j in range(k + 1, min(n - 1, k + u) + 1):
                lu[u + i - j, j] -= lik * lu[u + k - j, j]
    return lu


def _band_lu_solve_loop(lu, l, u, b):
    n = b.shape[0]
    x = b.copy()
    for i in range(n):
        acc = x[i]
        for k in range(max(0, i - l), i):
            acc -= lu[u + i - k, k] * x[k]
        x[i] = acc
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for k in range(i + 1, min(n - 1, i + u) + 1):
            acc -= lu[u + i - k, k] * x[k]
        x[i] = acc / lu[u, i]
    return x


def _newmark_constant_loop(m_ab, eff_ab, l, u, loads, u0, v0, a0, dt, beta, gamma):
    nsteps = loads.shape[0] - 1
    n = u0.shape[0]
    U = np.empty((nsteps + 1, n))
    V = np.empty((nsteps + 1, n))
    A = np.empty((nsteps + 1, n))
    U[0] = u0
    V[0] = v0
    A[0] = a0
    c0 = 1.0 / (beta * dt * dt)
    c2 = 1.0 / (beta * dt)
    c3 = 1.0 / (2.0 * beta) - 1.0
    lu = _band_lu_factor_loop(eff_ab, l, u)
    tmp = np.empty(n)
    for i in range(nsteps):
        for r in range(n):
            tmp[r] = c0 * U[i, r] + c2 * V[i, r] + c3 * A[i, r]
        rhs = _band_matvec_loop(m_ab, l, u, tmp)
        for r in range(n):
            rhs[r] += loads[i + 1, r]
        un = _band_lu_solve_loop(lu, l, u, rhs)
        for r in range(n):
            an = c0 * (un[r] - U[i, r]) - c2 * V[i, r] - c3 * A[i, r]
            U[i + 1, r] = un[r]
            A[i + 1, r] = an
            V[i + 1, r] = V[i, r] + dt * ((1.0 - gamma) * A[i, r] + gamma * an)
    return U, V, A


def _neglog_convolve_loop(x, x0, eps, rnodes, rweights):
    npts = x.shape[0]
    nr = rnodes.shape[0]
    out = np.zeros(npts)
    for p in range(npts):
        s = min(max(x[p] - x0, -eps), eps)
        acc = 0.0
        for side in range(2):
            length = (s + eps) if side == 0 else (eps - s)
            if length <= 0.0:
                continue
            sign = -1.0 if side == 0 else 1.0
            for q in range(nr):
                y = s + sign * length * rnodes[q]
                z = y / eps
                if abs(z) >= 1.0:
                    continue
                arg = abs(x[p] - y - x0)
                if arg <= 0.0:
                    continue
                phi = _A_STD * math.exp(-1.0 / (1.0 - z * z)) / eps
                acc += length * rweights[q] * phi * (-math.log(arg))
        out[p] = acc
    return out


if NUMBA_AVAILABLE:
    _njit = numba.njit(cache=True)
    _band_matvec_loop = _njit(_band_matvec_loop)
    _band_lu_factor_loop = _njit(_band_lu_factor_loop)
    _band_lu_solve_loop = _njit(_band_lu_solve_loop)
    _newmark_constant_loop = _njit(_newmark_constant_loop)
    _scatter_elements_loop = _njit(_scatter_elements_loop)
    _neglog_convolve_loop = _njit(_neglog_convolve_loop)


def _neglog_convolve_jit(x, x0, eps, rnodes, rweights):
    return _neglog_convolve_loop(np.ascontiguousarray(x, dtype=float), float(x0), float(eps),
                                 rnodes, rweights)


numba_impl = SimpleNamespace(
    scatter_elements=_scatter_elements_loop,
    band_matvec=_band_matvec_loop,
    band_lu_factor=_band_lu_factor_loop,
    band_lu_solve=_band_lu_solve_loop,
    newmark_constant=_newmark_constant_loop,
    neglog_convolve=_neglog_convolve_jit,
    name="numba" if NUMBA_AVAILABLE else "python-loops",
)

active = numba_impl if USE_NUMBA else numpy_impl
