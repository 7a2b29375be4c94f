"""Clamped Hermite-cubic space on a uniform mesh of (0, 1) and its matrices.

DOFs are (value, slope) per node, node-major; the four DOFs at x = 0 and
x = 1 are eliminated, so vectors on the free space have length 2(n - 1).
Matrices are kept in LAPACK band storage with 3 sub- and 3 super-diagonals.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import kernels
from .distmodel import DistributionalExpr
from .mollify import RegularizedField, SeparableField, mollify_expr

BAND = 3


class ResolutionWarning(UserWarning):
    """A mollifier bump is narrower than the discretization can resolve."""


@dataclass(frozen=True)
class HermiteMesh:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 elements, got {self.n}")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.n + 1)

    @property
    def dof_count(self):
        return 2 * (self.n + 1)

    @property
    def free_count(self):
        return 2 * (self.n - 1)

    def embed(self, coeffs):
        """Free DOF vector(s) -> full vector(s) with clamped DOFs set to zero."""
        coeffs = np.asarray(coeffs, dtype=float)
        full = np.zeros(coeffs.shape[:-1] + (self.dof_count,))
        full[..., 2:-2] = coeffs
        return full


def build_space(n: int) -> HermiteMesh:
    return HermiteMesh(int(n))


def shape_functions(xi, h):
    """Hermite cubic shape functions and their x-derivatives at local xi in [0, 1].

    Returns three arrays of shape xi.shape + (4,): N, dN/dx, d2N/dx2.
    """
    xi = np.asarray(xi, dtype=float)
    x2, x3 = xi * xi, xi * xi * xi
    N = np.stack([1 - 3 * x2 + 2 * x3, h * (xi - 2 * x2 + x3), 3 * x2 - 2 * x3, h * (x3 - x2)], -1)
    dN = np.stack([(-6 * xi + 6 * x2) / h, 1 - 4 * xi + 3 * x2, (6 * xi - 6 * x2) / h,
                   3 * x2 - 2 * xi], -1)
    d2N = np.stack([(-6 + 12 * xi) / h**2, (-4 + 6 * xi) / h, (6 - 12 * xi) / h**2,
                    (-2 + 6 * xi) / h], -1)
    return N, dN, d2N


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre per element.

    ``panels=None`` picks max(1, ceil(panels_per_scale * h / eps)) so a bump of
    half-width eps is sampled by at least ``panels_per_scale`` panels.
    """

    points_per_panel: int = 4
    panels: Optional[int] = None
    panels_per_scale: int = 4

    def panel_count(self, h, eps):
        if self.panels is not None:
            return int(self.panels)
        if eps is None:
            return 1
        return max(1, math.ceil(self.panels_per_scale * h / eps))

    def local_rule(self, h, eps):
        """Nodes in [0, 1] and weights (summing to 1) on the reference element."""
        p = self.panel_count(h, eps)
        xg, wg = np.polynomial.legendre.leggauss(self.points_per_panel)
        edges = np.linspace(0.0, 1.0, p + 1)
        xi = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 / p * xg[None, :]).ravel()
        w = np.tile(0.5 / p * wg, p)
        return xi, w


class BandedMatrix:
    """Square matrix in band storage, ``ab[u + i - j, j] = A[i, j]``."""

    def __init__(self, ab, l=BAND, u=BAND):
        self.ab = np.ascontiguousarray(ab, dtype=float)
        self.l, self.u = l, u

    @property
    def n(self):
        return self.ab.shape[1]

    def todense(self):
        n = self.n
        out = np.zeros((n, n))
        for k in range(self.l + self.u + 1):
            d = k - self.u
            j = np.arange(max(0, -d), min(n, n - d))
            out[j + d, j] = self.ab[k, j]
        return out

    def matvec(self, x):
        return kernels.active.band_matvec(self.ab, self.l, self.u, np.ascontiguousarray(x, float))

    def __matmul__(self, x):
        return self.matvec(x)

    def __add__(self, other):
        return BandedMatrix(self.ab + other.ab, self.l, self.u)

    def __mul__(self, a):
        return BandedMatrix(self.ab * a, self.l, self.u)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((2 * BAND + 1, n)))


def _strip_clamped(ab):
    """Drop the two first and two last rows/columns of a full band matrix."""
    free = ab[:, 2:-2].copy()
    nf = free.shape[1]
    for k in range(free.shape[0]):
        i = np.arange(nf) + k - BAND
        free[k, (i < 0) | (i >= nf)] = 0.0
    return free


def _assemble_band(mesh, ke):
    ab = np.zeros((2 * BAND + 1, mesh.dof_count))
    kernels.active.scatter_elements(ab, np.ascontiguousarray(ke), BAND)
    return BandedMatrix(_strip_clamped(ab))


def _element_points(mesh, xi):
    left = mesh.nodes[:-1]
    return left[:, None] + mesh.h * xi[None, :]


def element_matrices(mesh, coef_values, w, xi, kind):
    """Element blocks (n_el, 4, 4) for coefficient values at the element quadrature points.

    kind: 'mass' <a u, v>, 'slope' <a u', v'>, 'bending' <a u'', v''>, 'axial' <a u'', v>.
    Row index is the test function, column index the trial function.
    """
    N, dN, d2N = shape_functions(xi, mesh.h)
    wq = w * mesh.h
    coef = np.broadcast_to(np.asarray(coef_values, dtype=float), (mesh.n, xi.size))
    test, trial = {"mass": (N, N), "slope": (dN, dN), "bending": (d2N, d2N),
                   "axial": (N, d2N)}[kind]
    return np.einsum("q,eq,qa,qb->eab", wq, coef, test, trial)


def element_load(mesh, values, w, xi):
    N, _, _ = shape_functions(xi, mesh.h)
    return np.einsum("q,eq,qa->ea", w * mesh.h, values, N)


def _assemble_vector(mesh, le):
    full = np.zeros(mesh.dof_count)
    idx = 2 * np.arange(mesh.n)[:, None] + np.arange(4)[None, :]
    np.add.at(full, idx, le)
    return full[2:-2]


def point_load(mesh, x0, weight=1.0):
    """Vector ``weight * v_i(x0)``: exact pairing of a Dirac with the basis."""
    e = min(int(x0 / mesh.h), mesh.n - 1)
    xi = x0 / mesh.h - e
    N, _, _ = shape_functions(np.array([xi]), mesh.h)
    full = np.zeros(mesh.dof_count)
    full[2 * e: 2 * e + 4] = weight * N[0]
    return full[2:-2]


@dataclass
class HermiteSystem:
    mesh: HermiteMesh
    M: BandedMatrix
    Kc: BandedMatrix
    G0: BandedMatrix
    G1: BandedMatrix
    G2: BandedMatrix
    kb_parts: List[Tuple[BandedMatrix, RegularizedField]] = field(default_factory=list)
    load_parts: List[Tuple[np.ndarray, RegularizedField]] = field(default_factory=list)
    epsilon: Optional[float] = None
    panels: int = 1

    @property
    def size(self):
        return self.mesh.free_count

    @property
    def kb_time_dependent(self):
        return any(T.constant is None for _, T in self.kb_parts)

    def Kb(self, t):
        out = BandedMatrix.zeros(self.size)
        for K, T in self.kb_parts:
            out = out + K * float(T(np.array([t]))[0])
        return out

    def load(self, t):
        return self.loads(np.array([t]))[0]

    def loads(self, times):
        """Load vectors at each time, shape (len(times), size)."""
        times = np.asarray(times, dtype=float)
        out = np.zeros((times.size, self.size))
        for L, T in self.load_parts:
            out += np.outer(T(times), L)
        return out


def assemble(field_c: RegularizedField, field_b: Optional[SeparableField],
             field_g: Optional[SeparableField], mesh: HermiteMesh,
             quad: QuadratureSpec = QuadratureSpec(), exact_dirac_loads=False) -> HermiteSystem:
    """Mass, bending, axial and Gram matrices plus load functionals."""
    # only spatially varying factors set the panel count; constants need none
    spatial = [field_c] if field_c.constant is None else []
    for sep in (field_b, field_g):
        if sep is not None:
            spatial += [X for X, _ in sep.factors if X.constant is None]
    eps_values = [f.epsilon_used for f in spatial if f.epsilon_used is not None]
    eps = min(eps_values) if eps_values else None
    if eps is not None and eps < 2 * mesh.h:
        warnings.warn(f"mollifier scale {eps:.4g} is below two elements (h = {mesh.h:.4g})",
                      ResolutionWarning, stacklevel=2)
    xi, w = quad.local_rule(mesh.h, eps)
    xq = _element_points(mesh, xi)

    M = _assemble_band(mesh, element_matrices(mesh, 1.0, w, xi, "mass"))
    S1 = _assemble_band(mesh, element_matrices(mesh, 1.0, w, xi, "slope"))
    S2 = _assemble_band(mesh, element_matrices(mesh, 1.0, w, xi, "bending"))
    Kc = _assemble_band(mesh, element_matrices(mesh, field_c(xq), w, xi, "bending"))
    G1 = M + S1
    G2 = G1 + S2

    kb_parts = []
    if field_b is not None:
        for X, T in field_b.factors:
            if X.constant == 0.0 or T.constant == 0.0:
                continue
            kb_parts.append((_assemble_band(mesh, element_matrices(mesh, X(xq), w, xi, "axial")), T))

    load_parts = []
    if field_g is not None:
        for X, T in field_g.factors:
            if X.constant == 0.0 or T.constant == 0.0:
                continue
            src = X.source.terms[0] if len(X.source.terms) == 1 else None
            if exact_dirac_loads and src is not None and src.kind == "dirac":
                L = point_load(mesh, src.x0, src.weight)
            else:
                L = _assemble_vector(mesh, element_load(mesh, X(xq), w, xi))
            load_parts.append((L, T))

    return HermiteSystem(mesh, M, Kc, M, G1, G2, kb_parts, load_parts, eps,
                         quad.panel_count(mesh.h, eps))


def hermite_interpolant(fn: Callable, dfn: Callable, mesh: HermiteMesh):
    """Free DOFs of the Hermite interpolant (nodal values and slopes)."""
    x = mesh.nodes
    full = np.empty(mesh.dof_count)
    full[0::2] = fn(x)
    full[1::2] = dfn(x)
    return full[2:-2].copy()


def l2_projection(fn: Callable, mesh: HermiteMesh, quad: QuadratureSpec = QuadratureSpec(panels=4)):
    xi, w = quad.local_rule(mesh.h, None)
    xq = _element_points(mesh, xi)
    rhs = _assemble_vector(mesh, element_load(mesh, fn(xq), w, xi))
    G0 = _assemble_band(mesh, element_matrices(mesh, 1.0, w, xi, "mass"))
    return kernels.numpy_impl.band_lu_solve(G0.ab, BAND, BAND, rhs)


def project_initial(f, mesh: HermiteMesh):
    """Initial data -> free DOFs.

    C1 fields (a derivative is available) are Hermite-interpolated; otherwise
    the L2 projection onto the clamped space is used.
    """
    if isinstance(f, DistributionalExpr):
        f = mollify_expr(f, None)
    if f.constant == 0.0:
        return np.zeros(mesh.free_count)
    try:
        if f.deriv is not None:
            return hermite_interpolant(f, f.deriv, mesh)
        return l2_projection(f, mesh)
    except FloatingPointError as exc:  # pragma: no cover - numpy errstate dependent
        raise ValueError(f"initial data failed to evaluate on the mesh: {exc}") from None


def eval_solution(coeffs, mesh: HermiteMesh, x, deriv: int = 0):
    """u, u' or u'' of the free DOF vector ``coeffs`` at positions ``x``.

    ``coeffs`` may carry leading batch dimensions (e.g. a trajectory);
    the result then has shape ``coeffs.shape[:-1] + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    full = mesh.embed(coeffs)
    e = np.minimum((x / mesh.h).astype(int), mesh.n - 1)
    xi = x / mesh.h - e
    basis = shape_functions(xi, mesh.h)[deriv]  # x.shape + (4,)
    idx = 2 * e[..., None] + np.arange(4)  # x.shape + (4,)
    return (full[..., idx] * basis).sum(axis=-1)
