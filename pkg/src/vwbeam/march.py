"""Newmark (average acceleration) marching of M u'' + (Kc + Kb(t)) u = g(t)."""
import csv
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .femcore import BAND, HermiteMesh, HermiteSystem, ResolutionWarning, eval_solution

BETA = 0.25
GAMMA = 0.5


class NumericalFailure(ArithmeticError):
    """Non-finite state or a singular effective matrix during marching."""


@dataclass(frozen=True)
class TimeGrid:
    m: int
    T: float = 1.0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least 2 time steps, got {self.m}")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")

    @property
    def dt(self):
        return self.T / self.m

    @property
    def nodes(self):
        return np.linspace(0.0, self.T, self.m + 1)


@dataclass
class Trajectory:
    U: np.ndarray  # (m + 1, free dofs)
    V: np.ndarray
    A: np.ndarray
    grid: TimeGrid
    mesh: HermiteMesh

    def at(self, x, deriv=0):
        """u(x, t_i) for every time node, shape (m + 1,) + x.shape."""
        return eval_solution(self.U, self.mesh, np.asarray(x, dtype=float), deriv)


def _warn_time_resolution(sys, grid):
    for parts in (sys.load_parts, sys.kb_parts):
        for _, T in parts:
            eps = T.epsilon_used
            if eps is None or not any(term.kind == "dirac" for term in T.source.terms):
                continue
            if grid.dt > eps / 4:
                warnings.warn(f"time step {grid.dt:.4g} undersamples a time impulse of "
                              f"width {eps:.4g} (want dt <= eps/4)", ResolutionWarning, stacklevel=3)
                return


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            bad = np.argwhere(~np.isfinite(a).all(axis=-1))
            step = int(bad[0, 0]) if a.ndim > 1 and bad.size else -1
            raise NumericalFailure(f"non-finite state at step {step}")


def newmark_march(sys: HermiteSystem, u0, v0, grid: TimeGrid, impl=None) -> Trajectory:
    impl = impl or kernels.active
    _warn_time_resolution(sys, grid)
    dt = grid.dt
    t = grid.nodes
    n = sys.size
    u0 = np.ascontiguousarray(u0, dtype=float)
    v0 = np.ascontiguousarray(v0, dtype=float)
    if u0.shape != (n,) or v0.shape != (n,):
        raise ValueError(f"initial vectors must have length {n}")
    loads = np.ascontiguousarray(sys.loads(t))
    K0 = sys.Kc + sys.Kb(0.0)
    try:
        a0 = impl.band_lu_solve(impl.band_lu_factor(sys.M.ab, BAND, BAND), BAND, BAND,
                                loads[0] - K0.matvec(u0))
    except (kernels.SingularPivotError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(f"singular mass matrix: {exc}") from None

    c0 = 1.0 / (BETA * dt * dt)
    m_ab = sys.M.ab
    try:
        if not sys.kb_time_dependent:
            eff = (sys.M * c0 + K0).ab
            U, V, A = impl.newmark_constant(m_ab, eff, BAND, BAND, loads, u0, v0, a0,
                                            dt, BETA, GAMMA)
        else:
            U, V, A = _march_varying(sys, impl, loads, u0, v0, a0, t, dt)
    except (kernels.SingularPivotError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(f"singular effective matrix: {exc}") from None
    _check_finite(U, V, A)
    return Trajectory(U, V, A, grid, sys.mesh)


def _march_varying(sys, impl, loads, u0, v0, a0, t, dt):
    nsteps = len(t) - 1
    n = u0.size
    U = np.empty((nsteps + 1, n))
    V = np.empty_like(U)
    A = np.empty_like(U)
    U[0], V[0], A[0] = u0, v0, a0
    c0 = 1.0 / (BETA * dt * dt)
    c2 = 1.0 / (BETA * dt)
    c3 = 1.0 / (2 * BETA) - 1.0
    Mc = sys.M * c0 + sys.Kc
    for i in range(nsteps):
        eff = (Mc + sys.Kb(t[i + 1])).ab
        rhs = loads[i + 1] + sys.M.matvec(c0 * U[i] + c2 * V[i] + c3 * A[i])
        un = impl.band_lu_solve(impl.band_lu_factor(eff, BAND, BAND), BAND, BAND, rhs)
        if not np.all(np.isfinite(un)):
            raise NumericalFailure(f"non-finite state at step {i + 1}")
        an = c0 * (un - U[i]) - c2 * V[i] - c3 * A[i]
        U[i + 1], A[i + 1] = un, an
        V[i + 1] = V[i] + dt * ((1 - GAMMA) * A[i] + GAMMA * an)
    return U, V, A


def discrete_energy(traj: Trajectory, sys: HermiteSystem):
    """1/2 (v^T M v + u^T Kc u) at every time node."""
    kin = np.einsum("ij,ij->i", traj.V, np.array([sys.M.matvec(v) for v in traj.V]))
    pot = np.einsum("ij,ij->i", traj.U, np.array([sys.Kc.matvec(u) for u in traj.U]))
    return 0.5 * (kin + pot)


def cross_section(traj: Trajectory, x: float):
    """(t_i, u(x, t_i)) for all time nodes."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"position {x} outside [0, 1]")
    return traj.grid.nodes.copy(), traj.at(np.array([x]))[:, 0]


def write_surface_csv(traj: Trajectory, path, x_points: int = 101, t_stride: Optional[int] = None):
    """Long-format (x, t, u) table on a uniform output grid."""
    x = np.linspace(0.0, 1.0, x_points)
    stride = t_stride or max(1, traj.grid.m // 128)
    idx = np.arange(0, traj.grid.m + 1, stride)
    if idx[-1] != traj.grid.m:
        idx = np.append(idx, traj.grid.m)
    vals = eval_solution(traj.U[idx], traj.mesh, x)
    t = traj.grid.nodes[idx]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "u"])
        for k, tk in enumerate(t):
            for j, xj in enumerate(x):
                w.writerow([f"{xj:.6g}", f"{tk:.6g}", f"{vals[k, j]:.10e}"])


def write_cross_section_csv(traj: Trajectory, path, x: float = 0.5):
    t, u = cross_section(traj, x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u"])
        w.writerows([f"{a:.6g}", f"{b:.10e}"] for a, b in zip(t, u))
