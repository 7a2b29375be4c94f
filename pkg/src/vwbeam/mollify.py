"""Friedrichs mollification of term expressions.

phi(s) = A exp(-1/(1 - s^2)) on |s| < 1, phi_eps(s) = phi(s/eps)/eps.
Dirac and Heaviside terms are mollified analytically (bump and bump CDF);
smooth terms by Gauss-Legendre convolution; -log|s - x0| by graded panels
split at the singular point.
"""
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from . import kernels
from .distmodel import (DistributionalExpr, ExpressionError, PositivityDecomposition,
                        regular_part)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_LOG_NODES, _LOG_WEIGHTS = kernels.graded_nodes()
CDF_TABLE_INTERVALS = 2048


class WindowError(ValueError):
    pass


class PositivityCheckError(AssertionError):
    """A certified decomposition produced a field below its lower bound."""


@functools.lru_cache(maxsize=None)
def compute_normalizer() -> float:
    """A such that A * integral of exp(-1/(1-s^2)) over (-1, 1) equals 1."""
    mass, _ = integrate.quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0,
                             epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 / mass


def _bump(s, normalizer):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    ss = np.where(inside, s, 0.0)
    return np.where(inside, normalizer * np.exp(-1.0 / (1.0 - ss * ss)), 0.0)


def _bump_prime(s, normalizer):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    ss = np.where(inside, s, 0.0)
    q = 1.0 - ss * ss
    return np.where(inside, normalizer * np.exp(-1.0 / q) * (-2.0 * ss / (q * q)), 0.0)


@functools.lru_cache(maxsize=None)
def _cdf_spline():
    A = compute_normalizer()
    edges = np.linspace(-1.0, 1.0, CDF_TABLE_INTERVALS + 1)
    xg, wg = np.polynomial.legendre.leggauss(16)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = mid[:, None] + half[:, None] * xg[None, :]
    cell = (half[:, None] * wg[None, :] * _bump(nodes, A)).sum(axis=1)
    values = np.concatenate([[0.0], np.cumsum(cell)])
    # exact symmetry Phi(-s) = 1 - Phi(s), so the jump value is 1/2 to roundoff
    values = 0.5 * (values + 1.0 - values[::-1])
    return CubicSpline(edges, values)


@dataclass(frozen=True)
class Mollifier:
    normalizer: float = field(default_factory=compute_normalizer)
    dimension: int = 1

    def __call__(self, s, t=None):
        if self.dimension == 2:
            return _bump(s, self.normalizer) * _bump(t, self.normalizer)
        return _bump(s, self.normalizer)

    def scaled(self, s, eps):
        return _bump(np.asarray(s) / eps, self.normalizer) / eps

    def scaled_prime(self, s, eps):
        return _bump_prime(np.asarray(s) / eps, self.normalizer) / (eps * eps)

    def cdf(self, s, eps):
        z = np.asarray(s, dtype=float) / eps
        out = np.clip(_cdf_spline()(np.clip(z, -1.0, 1.0)), 0.0, 1.0)
        return np.where(z <= -1.0, 0.0, np.where(z >= 1.0, 1.0, out))


@dataclass(frozen=True)
class MollifierNet:
    epsilon: float
    reparam: str = "identity"  # identity | log | loglog
    N: int = 1
    eps0: float = 1.0
    mollifier: Mollifier = field(default_factory=Mollifier)

    @property
    def effective(self):
        return effective_epsilon(self)


def effective_epsilon(net: MollifierNet) -> float:
    eps = net.epsilon
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    if net.reparam == "identity":
        out = eps
    elif net.reparam == "log":
        if eps >= 1.0:
            raise ValueError("log-type reparametrization needs epsilon < 1")
        out = math.log(1.0 / eps) ** (-1.0 / net.N)
    elif net.reparam == "loglog":
        ll = math.log(math.log(1.0 / eps)) if eps < 1.0 else -math.inf
        if ll <= 0:
            raise ValueError(f"epsilon={eps} too large for the loglog scheme (log log(1/eps) <= 0)")
        out = 1.0 / ll
    else:
        raise ValueError(f"unknown reparametrization {net.reparam!r}")
    if not 0 < out <= net.eps0:
        raise ValueError(f"effective scale {out:.4g} outside (0, eps0={net.eps0}]")
    return out


@dataclass(frozen=True)
class RegularizedField:
    """A smooth function of one variable on ``window``."""

    fn: Callable = field(repr=False)
    epsilon_used: Optional[float]
    source: DistributionalExpr
    window: Tuple[float, float] = (0.0, 1.0)
    deriv: Optional[Callable] = field(default=None, repr=False)
    lower_bound: Optional[float] = None
    bumps: Tuple[float, ...] = ()
    constant: Optional[float] = None  # set when the field is a constant function

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.window
        slack = 1e-12 * max(1.0, hi - lo)
        if s.size and (s.min() < lo - slack or s.max() > hi + slack):
            raise WindowError(f"evaluation outside window {self.window}")
        return self.fn(s)

    def sup_norm(self, grid=10_000):
        """Grid maximum of |field|; bump centers are added to the grid."""
        if self.constant is not None:
            return abs(self.constant)
        lo, hi = self.window
        s = np.linspace(lo, hi, grid)
        extra = [b for b in self.bumps if lo <= b <= hi]
        if extra:
            s = np.concatenate([s, extra])
        return float(np.max(np.abs(self(s))))


def _conv_smooth(f, eps, A):
    z, w = _GL_NODES, _GL_WEIGHTS * _bump(_GL_NODES, A)

    def value(s):
        s = np.asarray(s, dtype=float)
        return (f(s[..., None] - eps * z) * w).sum(axis=-1)

    wp = _GL_WEIGHTS * _bump_prime(_GL_NODES, A) / eps

    def deriv(s):
        s = np.asarray(s, dtype=float)
        return (f(s[..., None] - eps * z) * wp).sum(axis=-1)

    return value, deriv


def _central_diff(f, h=1e-3):
    def d(s):
        s = np.asarray(s, dtype=float)
        return (8 * (f(s + h) - f(s - h)) - (f(s + 2 * h) - f(s - 2 * h))) / (12 * h)
    return d


def _mollified_term(term, eps, mol):
    """(value, deriv, bump centers) of ``term * phi_eps``; eps None means no mollification."""
    A = mol.normalizer
    kind = term.kind
    if kind == "constant":
        v = float(term.value)
        return (lambda s: np.full(np.shape(s), v)), (lambda s: np.zeros(np.shape(s))), ()
    if eps is None:
        if kind == "dirac":
            raise ExpressionError("a Dirac term must be mollified (epsilon is None)")
        if kind == "smooth":
            return term.evaluate, _central_diff(term.evaluate), ()
        return term.evaluate, None, ()
    if kind == "dirac":
        x0, w = term.x0, term.weight
        return (lambda s: w * mol.scaled(np.asarray(s) - x0, eps),
                lambda s: w * mol.scaled_prime(np.asarray(s) - x0, eps), (x0,))
    if kind == "heaviside":
        x0, j = term.x0, term.jump
        return (lambda s: j * mol.cdf(np.asarray(s) - x0, eps),
                lambda s: j * mol.scaled(np.asarray(s) - x0, eps), ())
    if kind == "smooth":
        value, deriv = _conv_smooth(term.evaluate, eps, A)
        return value, deriv, ()
    if kind == "neglog":
        x0 = term.x0
        impl = kernels.active

        def value(s):
            s = np.asarray(s, dtype=float)
            flat = impl.neglog_convolve(s.ravel(), x0, eps, _LOG_NODES, _LOG_WEIGHTS)
            return flat.reshape(s.shape)

        return value, None, (x0,)
    raise ExpressionError(f"unknown term kind {kind!r}")


def _sum_terms(parts):
    fns = [p[0] for p in parts]

    def value(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        for f in fns:
            out = out + f(s)
        return out

    if all(p[1] is not None for p in parts):
        dfs = [p[1] for p in parts]

        def deriv(s):
            s = np.asarray(s, dtype=float)
            out = np.zeros(s.shape)
            for f in dfs:
                out = out + f(s)
            return out
    else:
        deriv = None
    bumps = tuple(b for p in parts for b in p[2])
    return value, deriv, bumps


def _check_window(e, eps, window):
    ext = eps or 0.0
    lo, hi = window[0] - ext, window[1] + ext
    for term in e.terms:
        if term.kind == "neglog" and max(abs(lo - term.x0), abs(hi - term.x0)) > 1.0:
            raise WindowError(
                f"-log|s-{term.x0}| is negative on the extended window [{lo}, {hi}]")


def mollify_expr(e: DistributionalExpr, net: Optional[MollifierNet],
                 window=(0.0, 1.0)) -> RegularizedField:
    """Term-wise convolution ``e * phi_eps`` of a one-dimensional expression.

    ``net=None`` returns the expression itself (no regularization), which is
    only possible without Dirac terms.
    """
    if e.arity == "xt":
        raise ExpressionError("use separable_mollify_2d for space-time expressions")
    eps = None if net is None else net.effective
    mol = Mollifier() if net is None else net.mollifier
    _check_window(e, eps, window)
    parts = [_mollified_term(t, eps, mol) for t in e.terms]
    value, deriv, bumps = _sum_terms(parts)
    const = None
    if all(t.kind == "constant" for t in e.terms):
        const = float(sum(t.value for t in e.terms))
    return RegularizedField(value, eps, e, tuple(window), deriv, None, bumps, const)


def mollify_positive(decomp: PositivityDecomposition, net: Optional[MollifierNet],
                     window=(0.0, 1.0), grid=10_000) -> RegularizedField:
    """``c_eps = c0 + mu * phi_eps`` with the lower bound ``c0`` verified on a grid."""
    full = decomp.reassemble()
    fld = mollify_expr(full, net, window)
    s = np.linspace(window[0], window[1], grid)
    vals = fld(s)
    if net is None:
        vals = vals[vals != np.inf]
    low = float(np.min(vals))
    if low < decomp.c0 - 1e-12:
        raise PositivityCheckError(
            f"mollified stiffness minimum {low:.15g} is below certified c0 = {decomp.c0}")
    return RegularizedField(fld.fn, fld.epsilon_used, decomp.reassemble(), fld.window,
                            fld.deriv, decomp.c0, fld.bumps, fld.constant)


@dataclass(frozen=True)
class SeparableField:
    """``sum_k X_k(x) T_k(t)`` with each factor a RegularizedField."""

    factors: Tuple[Tuple[RegularizedField, RegularizedField], ...]
    epsilon_used: Optional[float]
    source: DistributionalExpr

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast(x, t).shape)
        for X, T in self.factors:
            out = out + X(x) * T(t)
        return out

    @property
    def time_dependent(self):
        return any(T.constant is None for _, T in self.factors)

    @property
    def is_zero(self):
        return all((X.constant == 0.0) or (T.constant == 0.0) for X, T in self.factors)

    def sup_norm(self, x_grid=10_000, t_grid=2_001):
        """Space-time grid maximum of |field| (bump centers added on both axes)."""
        if not self.factors:
            return 0.0
        xs = [np.linspace(*self.factors[0][0].window, x_grid)]
        ts = [np.linspace(*self.factors[0][1].window, t_grid)]
        for X, T in self.factors:
            xs.append([b for b in X.bumps if X.window[0] <= b <= X.window[1]])
            ts.append([b for b in T.bumps if T.window[0] <= b <= T.window[1]])
        x = np.unique(np.concatenate([np.asarray(a, dtype=float) for a in xs]))
        t = np.unique(np.concatenate([np.asarray(a, dtype=float) for a in ts]))
        Xv = np.array([X(x) for X, _ in self.factors])
        Tv = np.array([T(t) for _, T in self.factors])
        return float(np.max(np.abs(Xv.T @ Tv)))


def separable_mollify_2d(e: DistributionalExpr, net: Optional[MollifierNet],
                         x_window=(0.0, 1.0), t_window=(0.0, 1.0)) -> SeparableField:
    """Mollify each factor of a separable ``xt`` expression with the 1-D net."""
    if e.arity != "xt":
        raise ExpressionError("separable_mollify_2d needs an xt expression")
    factors = []
    for xp, tp in e.factor_pairs():
        X = mollify_expr(DistributionalExpr((xp,), "x"), net, x_window)
        T = mollify_expr(DistributionalExpr((tp,), "t"), net, t_window)
        factors.append((X, T))
    eps = None if net is None else net.effective
    return SeparableField(tuple(factors), eps, e)


def zero_field(window=(0.0, 1.0), axis="x"):
    from .distmodel import Constant
    return mollify_expr(DistributionalExpr((Constant(0.0, axis),), axis), None, window)
