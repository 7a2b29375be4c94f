"""Discrete Sobolev norms, the W-norm, the energy bound and the E_L2 error."""
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg

from ..femcore import BAND, HermiteSystem, eval_solution
from ..march import Trajectory


@dataclass(frozen=True)
class NormReport:
    l2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    w_norm: float
    e_l2: Optional[float] = None


def _quad_forms(G, X):
    X = np.atleast_2d(X)
    GX = np.array([G.matvec(x) for x in X])
    return np.maximum(np.einsum("ij,ij->i", X, GX), 0.0)


def spatial_norms(coeffs, sys: HermiteSystem):
    """(l2, h1, h2) of one DOF vector, or per-row arrays for a stack of them."""
    coeffs = np.asarray(coeffs, dtype=float)
    out = tuple(np.sqrt(_quad_forms(G, coeffs)) for G in (sys.G0, sys.G1, sys.G2))
    if coeffs.ndim == 1:
        return tuple(float(v[0]) for v in out)
    return out


def w_norm(traj: Trajectory, sys: HermiteSystem) -> float:
    """sqrt(max_i |u^i|_H2^2 + max_i |v^i|_L2^2)."""
    h2sq = _quad_forms(sys.G2, traj.U)
    l2sq = _quad_forms(sys.G0, traj.V)
    return math.sqrt(h2sq.max() + l2sq.max())


def w_difference(a: Trajectory, b: Trajectory, sys: HermiteSystem) -> float:
    if a.U.shape != b.U.shape:
        raise ValueError(f"trajectory shapes differ: {a.U.shape} vs {b.U.shape}")
    h2sq = _quad_forms(sys.G2, a.U - b.U)
    l2sq = _quad_forms(sys.G0, a.V - b.V)
    return math.sqrt(h2sq.max() + l2sq.max())


def norm_report(traj: Trajectory, sys: HermiteSystem, e_l2=None) -> NormReport:
    l2, h1, h2 = spatial_norms(traj.U, sys)
    return NormReport(l2, h1, h2, w_norm(traj, sys), e_l2)


def dual_h2_norm(load, sys: HermiteSystem):
    """sqrt(L^T G2^{-1} L): the H^-2 norm of the functional L restricted to V_h.

    Accepts one load vector or a stack (rows).
    """
    load = np.asarray(load, dtype=float)
    X = np.atleast_2d(load)
    Y = scipy.linalg.solve_banded((BAND, BAND), sys.G2.ab, X.T, check_finite=False).T
    out = np.sqrt(np.maximum(np.einsum("ij,ij->i", X, Y), 0.0))
    return float(out[0]) if load.ndim == 1 else out


def ehrling_constant(sys: HermiteSystem) -> float:
    """Smallest C with |v|_H1^2 <= 1/2 |v|_H2^2 + C |v|_L2^2 on V_h."""
    A = sys.G1.todense() - 0.5 * sys.G2.todense()
    B = sys.G0.todense()
    n = A.shape[0]
    lam = scipy.linalg.eigh(A, B, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return max(0.0, float(lam[0]))


def energy_constants(C, C1, c0, C_half, T):
    """(D_T, F_T) from the stiffness/axial bounds, c0, the Ehrling constant and T."""
    alpha = min(c0 / 2.0, 1.0)
    lam = c0 * C_half * (1.0 + T)
    return (C + lam) / alpha, (C1 + 1.0 + lam) / alpha


@dataclass(frozen=True)
class EnergyConstants:
    c0: float
    C: float
    C1: float
    C_half: float
    T: float
    D_T: float
    F_T: float
    f1_h2: float
    f2_l2: float
    g_dual_sq: float
    rhs_bound: float
    lhs_max: float

    @property
    def margin(self):
        if self.lhs_max == 0.0:
            return math.inf
        return self.rhs_bound / self.lhs_max

    def as_dict(self):
        d = asdict(self)
        d["margin"] = self.margin
        return d

    def summary(self):
        return (f"c0={self.c0:.4g} C={self.C:.4g} C1={self.C1:.4g} C_half={self.C_half:.4g} "
                f"D_T={self.D_T:.4g} F_T={self.F_T:.4g} lhs={self.lhs_max:.4e} "
                f"rhs={self.rhs_bound:.4e} margin={self.margin:.4g}")


def load_dual_norm_sq_integral(sys: HermiteSystem, T: float, samples: int = 20_001):
    """int_0^T |g(t)|_{H^-2}^2 dt for the separable load sum_k T_k(t) L_k."""
    if not sys.load_parts:
        return 0.0
    L = np.array([p[0] for p in sys.load_parts])
    Y = scipy.linalg.solve_banded((BAND, BAND), sys.G2.ab, L.T, check_finite=False)
    Q = L @ Y  # Q_kl = L_k^T G2^-1 L_l
    t = np.linspace(0.0, T, samples)
    bumps = [b for _, Tk in sys.load_parts for b in Tk.bumps if 0.0 <= b <= T]
    if bumps:
        t = np.unique(np.concatenate([t, bumps]))
    Tv = np.array([Tk(t) for _, Tk in sys.load_parts])
    dens = np.einsum("kt,kl,lt->t", Tv, Q, Tv)
    return float(np.trapezoid(np.maximum(dens, 0.0), t))


def energy_bound_check(traj: Trajectory, sys: HermiteSystem, c_field, b_field, c0: float,
                       C_half: Optional[float] = None) -> EnergyConstants:
    """Compare the marched W-norm squared with the a-priori energy bound.

    f1 and f2 enter through their discrete versions u^0 and v^0; the load
    enters through the discrete dual norm.  A violated bound is reported
    through ``margin < 1``, not raised.
    """
    T = traj.grid.T
    C = c_field.sup_norm()
    C1 = 0.0 if b_field is None or not b_field.factors else b_field.sup_norm()
    if C_half is None:
        C_half = ehrling_constant(sys)
    D_T, F_T = energy_constants(C, C1, c0, C_half, T)
    f1_h2 = spatial_norms(traj.U[0], sys)[2]
    f2_l2 = spatial_norms(traj.V[0], sys)[0]
    g_sq = load_dual_norm_sq_integral(sys, T)
    rhs = (D_T * f1_h2**2 + f2_l2**2 + g_sq) * math.exp(T * F_T)
    lhs = w_norm(traj, sys) ** 2
    return EnergyConstants(c0, C, C1, C_half, T, D_T, F_T, f1_h2, f2_l2, g_sq, rhs, lhs)


def _gauss_points(mesh, order=6):
    xg, wg = np.polynomial.legendre.leggauss(order)
    xi = 0.5 * (xg + 1.0)
    x = (mesh.nodes[:-1, None] + mesh.h * xi[None, :]).ravel()
    w = np.tile(0.5 * wg * mesh.h, mesh.n)
    return x, w


def error_E_L2(traj: Trajectory, reference: Union[Callable, Trajectory], order: int = 6) -> float:
    """max over time nodes of the spatial L2 distance to ``reference``.

    ``reference`` is either ``u(x, t)`` (vectorized) or another trajectory on a
    time grid whose step divides evenly into this one's.  The integral uses
    Gauss points on the finer of the two meshes.
    """
    t = traj.grid.nodes
    if isinstance(reference, Trajectory):
        if abs(reference.grid.T - traj.grid.T) > 1e-14 or reference.grid.m % traj.grid.m:
            raise ValueError(f"grid mismatch: reference m={reference.grid.m} "
                             f"vs m={traj.grid.m}")
        stride = reference.grid.m // traj.grid.m
        mesh = traj.mesh if traj.mesh.n >= reference.mesh.n else reference.mesh
        x, w = _gauss_points(mesh, order)
        ref = eval_solution(reference.U[::stride], reference.mesh, x)
    else:
        x, w = _gauss_points(traj.mesh, order)
        ref = np.asarray(reference(x[None, :], t[:, None]), dtype=float)
        ref = np.broadcast_to(ref, (t.size, x.size))
    diff = traj.at(x) - ref
    return float(np.sqrt((diff**2 @ w).max()))


__all__ = [
    "NormReport", "EnergyConstants", "spatial_norms", "w_norm", "w_difference", "norm_report",
    "dual_h2_norm", "ehrling_constant", "energy_constants", "energy_bound_check",
    "load_dual_norm_sq_integral", "error_E_L2",
]
