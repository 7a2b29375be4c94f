"""Distributional data as finite sums of five term kinds.

Spatial coefficients (c, f1, f2) are one-dimensional expressions in ``x``.
The axial force ``b`` and the transversal force ``g`` are sums of separable
products ``X(x) * T(t)``.  Everything is immutable.
"""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

KINDS = ("constant", "smooth", "heaviside", "dirac", "neglog")

_SMOOTH_NAMESPACE = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh",
                 "arctan", "abs", "pi", "e", "where", "maximum", "minimum")
}


class ExpressionError(ValueError):
    """Malformed term or expression."""


class NotProvablyPositive(ValueError):
    """The term structure does not certify ``c - c0`` as a positive distribution."""


class QuadratureError(ArithmeticError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


def _check_axis(axis):
    if axis not in ("x", "t"):
        raise ExpressionError(f"axis must be 'x' or 't', got {axis!r}")


@dataclass(frozen=True)
class Constant:
    value: float
    axis: str = "x"
    kind = "constant"

    def __post_init__(self):
        _check_axis(self.axis)

    def evaluate(self, s):
        return np.full(np.shape(s), float(self.value))


@dataclass(frozen=True)
class Smooth:
    """Smooth function given as a numpy expression in ``x`` or ``t``.

    ``scale`` rescales the argument: the term evaluates ``f(scale * s)``.
    """

    expr: str
    axis: str = "x"
    smoothness: str = "C_inf"
    scale: float = 1.0
    kind = "smooth"
    _code: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_axis(self.axis)
        try:
            code = compile(self.expr, "<smooth term>", "eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse smooth expression {self.expr!r}: {exc}") from None
        bad = [n for n in code.co_names if n not in _SMOOTH_NAMESPACE and n != self.axis]
        if bad:
            raise ExpressionError(f"unknown names {bad} in smooth expression {self.expr!r}")
        object.__setattr__(self, "_code", code)

    def __reduce__(self):
        # code objects do not pickle; rebuild from the source string
        return (Smooth, (self.expr, self.axis, self.smoothness, self.scale))

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        ns = dict(_SMOOTH_NAMESPACE)
        ns[self.axis] = self.scale * s
        out = eval(self._code, {"__builtins__": {}}, ns)
        return np.broadcast_to(np.asarray(out, dtype=float), s.shape).copy()


@dataclass(frozen=True)
class Heaviside:
    x0: float
    jump: float = 1.0
    axis: str = "x"
    kind = "heaviside"

    def __post_init__(self):
        _check_axis(self.axis)

    def evaluate(self, s):
        return np.where(np.asarray(s) >= self.x0, float(self.jump), 0.0)


@dataclass(frozen=True)
class Dirac:
    x0: float
    weight: float = 1.0
    axis: str = "x"
    kind = "dirac"

    def __post_init__(self):
        _check_axis(self.axis)

    def evaluate(self, s):
        raise ExpressionError("a Dirac term has no pointwise values")


@dataclass(frozen=True)
class NegLog:
    """``-log|s - x0|``."""

    x0: float
    axis: str = "x"
    kind = "neglog"

    def __post_init__(self):
        _check_axis(self.axis)

    def evaluate(self, s):
        d = np.abs(np.asarray(s, dtype=float) - self.x0)
        with np.errstate(divide="ignore"):
            return -np.log(d)


DistTerm = Union[Constant, Smooth, Heaviside, Dirac, NegLog]


@dataclass(frozen=True)
class Product:
    """Separable space-time term ``x_part(x) * t_part(t)``."""

    x_part: DistTerm
    t_part: DistTerm
    kind = "product"

    def __post_init__(self):
        if self.x_part.axis != "x" or self.t_part.axis != "t":
            raise ExpressionError("Product needs an x-axis factor and a t-axis factor")


@dataclass(frozen=True)
class DistributionalExpr:
    terms: Tuple[Union[DistTerm, Product], ...]
    arity: str = "x"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.arity not in ("x", "t", "xt"):
            raise ExpressionError(f"arity must be 'x', 't' or 'xt', got {self.arity!r}")
        for term in self.terms:
            if isinstance(term, Product):
                if self.arity != "xt":
                    raise ExpressionError("Product terms need arity 'xt'")
            elif self.arity != "xt" and term.axis != self.arity:
                raise ExpressionError(f"{term!r} does not live on axis {self.arity!r}")

    def __add__(self, other):
        if self.arity != other.arity:
            raise ExpressionError("cannot add expressions of different arity")
        return DistributionalExpr(self.terms + other.terms, self.arity)

    def scaled(self, a):
        return DistributionalExpr(tuple(_scale_term(t, a) for t in self.terms), self.arity)

    def factor_pairs(self):
        """``[(x_term, t_term), ...]`` for an ``xt`` expression; missing factors are 1."""
        if self.arity != "xt":
            raise ExpressionError("factor_pairs needs arity 'xt'")
        pairs = []
        for term in self.terms:
            if isinstance(term, Product):
                pairs.append((term.x_part, term.t_part))
            elif term.axis == "x":
                pairs.append((term, Constant(1.0, "t")))
            else:
                pairs.append((Constant(1.0, "x"), term))
        return pairs

    def has(self, kind):
        for term in self.terms:
            parts = (term.x_part, term.t_part) if isinstance(term, Product) else (term,)
            if any(p.kind == kind for p in parts):
                return True
        return False

    def is_time_dependent(self):
        if self.arity == "x":
            return False
        if self.arity == "t":
            return True
        return any(t.kind != "constant" for _, t in self.factor_pairs())

    def canonical(self):
        """Merge constants, drop zero constants; other terms keep their order."""
        if self.arity == "xt":
            return self
        const = sum(t.value for t in self.terms if t.kind == "constant")
        rest = tuple(t for t in self.terms if t.kind != "constant")
        head = (Constant(const, self.arity),) if const != 0.0 else ()
        return DistributionalExpr(head + rest, self.arity)


def expr(*terms, arity=None):
    """Convenience constructor inferring arity from the terms."""
    if arity is None:
        if any(isinstance(t, Product) for t in terms):
            arity = "xt"
        else:
            axes = {t.axis for t in terms}
            arity = "xt" if len(axes) > 1 else (axes.pop() if axes else "x")
    return DistributionalExpr(tuple(terms), arity)


def _scale_term(term, a):
    if isinstance(term, Product):
        return Product(_scale_term(term.x_part, a), term.t_part)
    if term.kind == "constant":
        return replace(term, value=a * term.value)
    if term.kind == "heaviside":
        return replace(term, jump=a * term.jump)
    if term.kind == "dirac":
        return replace(term, weight=a * term.weight)
    if term.kind == "smooth":
        return replace(term, expr=f"{float(a)!r}*({term.expr})")
    raise ExpressionError(f"cannot scale a {term.kind} term inside the closed term set")


def regular_part(e: DistributionalExpr, s):
    """Pointwise values of the non-Dirac part of a one-dimensional expression."""
    if e.arity == "xt":
        raise ExpressionError("regular_part is defined for one-dimensional expressions")
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    for term in e.terms:
        if term.kind != "dirac":
            out = out + term.evaluate(s)
    return out


# ---------------------------------------------------------------------------
# duality pairing


def _quad(f, a, b, points=None, tol=1e-9):
    pts = None
    if points:
        pts = [p for p in points if a < p < b] or None
    val, err = integrate.quad(f, a, b, points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
    if err > tol * max(1.0, abs(val)):
        raise QuadratureError("pairing quadrature did not converge", err)
    return val


def _pair_term(term, phi, support):
    a, b = support
    if term.kind == "dirac":
        return term.weight * float(phi(term.x0)) if a <= term.x0 <= b else 0.0
    if term.kind == "constant":
        return term.value * _quad(phi, a, b)
    if term.kind == "heaviside":
        lo = max(a, term.x0)
        return term.jump * _quad(phi, lo, b) if lo < b else 0.0
    if term.kind == "neglog":
        return _quad(lambda s: float(term.evaluate(s)) * phi(s) if s != term.x0 else 0.0,
                     a, b, points=[term.x0])
    return _quad(lambda s: float(term.evaluate(np.array(s))) * phi(s), a, b)


def pair_with_test(e: DistributionalExpr, phi: Callable, support: Tuple[float, float],
                   psi: Optional[Callable] = None,
                   t_support: Optional[Tuple[float, float]] = None) -> float:
    """Duality pairing ``<e, phi>``; for ``xt`` expressions the test is ``phi(x) psi(t)``."""
    if e.arity != "xt":
        return float(sum(_pair_term(t, phi, support) for t in e.terms))
    if psi is None or t_support is None:
        raise ExpressionError("an xt pairing needs psi and t_support")
    return float(sum(_pair_term(xp, phi, support) * _pair_term(tp, psi, t_support)
                     for xp, tp in e.factor_pairs()))


# ---------------------------------------------------------------------------
# positivity


@dataclass(frozen=True)
class PositivityDecomposition:
    c0: float
    mu: DistributionalExpr
    window: Tuple[float, float] = (0.0, 1.0)

    def reassemble(self) -> DistributionalExpr:
        return (DistributionalExpr((Constant(self.c0),), "x") + self.mu).canonical()


def grid_minimum(e: DistributionalExpr, window, grid=10_000):
    """Minimum of the regular part of ``e`` over a uniform grid on ``window``."""
    s = np.linspace(window[0], window[1], grid)
    vals = regular_part(e, s)
    vals = vals[vals != np.inf]  # +inf at a log singularity is not a minimum
    return float(np.min(vals))


def _check_neglog_window(e, window):
    for term in e.terms:
        if term.kind == "neglog" and max(abs(window[0] - term.x0), abs(window[1] - term.x0)) > 1.0:
            raise ExpressionError(
                f"-log|x-{term.x0}| turns negative on window {window}: need |x-x0| <= 1")


def certified_lower_bound(e: DistributionalExpr, window=(0.0, 1.0), grid=10_000, decimals=3):
    """Grid minimum of the regular part on ``window``, floored to ``decimals``."""
    _check_neglog_window(e, window)
    m = grid_minimum(e, window, grid)
    return float(np.floor(m * 10**decimals) / 10**decimals)


def decompose_positive(e: DistributionalExpr, c0: float, window=(0.0, 1.0),
                       grid=10_000) -> PositivityDecomposition:
    """Split ``e = c0 + mu`` with ``mu`` certified positive on ``window``.

    Dirac weights must be nonnegative; the regular part (constants, jumps,
    smooth and log terms) is checked against ``c0`` on a ``grid``-point grid
    covering the mollification extension window.
    """
    if e.arity != "x":
        raise ExpressionError("bending stiffness must be a spatial expression")
    if c0 <= 0:
        raise NotProvablyPositive(f"c0 must be positive, got {c0}")
    neg = [t for t in e.terms if t.kind == "dirac" and t.weight < 0]
    if neg:
        raise NotProvablyPositive(f"negative Dirac weight(s): {neg}")
    _check_neglog_window(e, window)
    m = grid_minimum(e, window, grid)
    if m < c0:
        raise NotProvablyPositive(
            f"regular part has minimum {m:.6g} < c0 = {c0:.6g} on window {window}")
    mu = (e + DistributionalExpr((Constant(-c0),), "x")).canonical()
    return PositivityDecomposition(float(c0), mu, tuple(window))


# ---------------------------------------------------------------------------
# physical model reduction


def _time_rescaled(term, s):
    """Terms of ``T(s*t)`` for a time term ``T``."""
    if term.kind == "constant":
        return [term]
    if term.kind == "dirac":
        return [Dirac(term.x0 / s, term.weight / s, "t")]
    if term.kind == "heaviside":
        return [Heaviside(term.x0 / s, term.jump, "t")]
    if term.kind == "neglog":
        return [Constant(-np.log(s), "t"), NegLog(term.x0 / s, "t")]
    return [replace(term, scale=term.scale * s)]


def _regions(R: DistributionalExpr):
    if R.arity != "x" or any(t.kind not in ("constant", "heaviside") for t in R.terms):
        raise ExpressionError("density R must be piecewise constant (constants and jumps)")
    cuts = sorted({t.x0 for t in R.terms if t.kind == "heaviside" and 0.0 < t.x0 < 1.0})
    edges = [0.0] + cuts + [1.0]
    regions = []
    for a, b in zip(edges[:-1], edges[1:]):
        val = float(regular_part(R, np.array([0.5 * (a + b)]))[0])
        if val <= 0:
            raise ExpressionError(f"density R must be positive, got {val} on [{a}, {b})")
        regions.append((a, b, val))
    return regions


def _indicator_terms(a, b):
    head = Constant(1.0) if a <= 0.0 else Heaviside(a, 1.0)
    return [head] if b >= 1.0 else [head, Heaviside(b, -1.0)]


def reduce_physical_model(A: DistributionalExpr, P: DistributionalExpr, R: DistributionalExpr,
                          g1: DistributionalExpr):
    """Map ``(A, P, R, g1)`` to ``(c, b, g)`` under ``t -> sqrt(R(x)) t``."""
    if A.arity != "x" or P.arity != "t" or g1.arity != "xt":
        raise ExpressionError("expected A(x), P(t) and g1(x, t)")
    regions = _regions(R)

    def per_region(time_terms_of):
        # time_terms_of(sqrtR) -> list of (x_term or None, t_term)
        variants = [time_terms_of(np.sqrt(r)) for _, _, r in regions]
        if all(v == variants[0] for v in variants):
            return [_product(xt, tt) for xt, tt in variants[0]]
        out = []
        for (a, b, _), variant in zip(regions, variants):
            for ind in _indicator_terms(a, b):
                for xt, tt in variant:
                    if xt is not None and xt.kind != "constant":
                        raise ExpressionError(
                            "piecewise density with a non-constant spatial factor in g1 "
                            "is outside the separable term set")
                    weight = 1.0 if xt is None else xt.value
                    out.append(Product(_scale_term(ind, weight), tt))
        return out

    b_terms = per_region(lambda s: [(None, tt) for term in P.terms for tt in _time_rescaled(term, s)])
    g_terms = per_region(lambda s: [(xp, tt) for xp, tp in g1.factor_pairs()
                                    for tt in _time_rescaled(tp, s)])
    return A, DistributionalExpr(tuple(b_terms), "xt"), DistributionalExpr(tuple(g_terms), "xt")


def _product(x_term, t_term):
    if x_term is None:
        return t_term
    return Product(x_term, t_term)


# ---------------------------------------------------------------------------
# config records


def _term_from_record(rec, axis_default):
    rec = dict(rec)
    kind = rec.pop("kind", None)
    if kind == "product":
        try:
            return Product(_term_from_record(rec["x"], "x"), _term_from_record(rec["t"], "t"))
        except KeyError as exc:
            raise ExpressionError(f"product record missing field {exc}") from None
    axis = rec.pop("axis", axis_default)
    try:
        if kind == "constant":
            term = Constant(float(rec.pop("value")), axis)
        elif kind == "smooth":
            term = Smooth(str(rec.pop("expr")), axis, str(rec.pop("smoothness", "C_inf")),
                          float(rec.pop("scale", 1.0)))
        elif kind == "heaviside":
            term = Heaviside(float(rec.pop("x0")), float(rec.pop("jump", 1.0)), axis)
        elif kind == "dirac":
            term = Dirac(float(rec.pop("x0")), float(rec.pop("weight", 1.0)), axis)
        elif kind == "neglog":
            term = NegLog(float(rec.pop("x0")), axis)
        else:
            raise ExpressionError(
                f"unknown term kind {kind!r}; expected one of {KINDS + ('product',)}")
    except KeyError as exc:
        raise ExpressionError(f"{kind} record missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ExpressionError):
            raise
        raise ExpressionError(f"bad value in {kind} record: {exc}") from None
    if rec:
        raise ExpressionError(f"unknown field(s) {sorted(rec)} in {kind} record")
    return term


def from_records(records: Sequence[dict], arity: str) -> DistributionalExpr:
    default_axis = "x" if arity in ("x", "xt") else "t"
    return DistributionalExpr(tuple(_term_from_record(r, default_axis) for r in records), arity)


def _term_record(term):
    if isinstance(term, Product):
        return {"kind": "product", "x": _term_record(term.x_part), "t": _term_record(term.t_part)}
    rec = {"kind": term.kind}
    if term.kind == "constant":
        rec["value"] = term.value
    elif term.kind == "smooth":
        rec["expr"] = term.expr
        if term.scale != 1.0:
            rec["scale"] = term.scale
    elif term.kind == "heaviside":
        rec.update(x0=term.x0, jump=term.jump)
    elif term.kind == "dirac":
        rec.update(x0=term.x0, weight=term.weight)
    else:
        rec["x0"] = term.x0
    rec["axis"] = term.axis
    return rec


def to_records(e: DistributionalExpr):
    return [_term_record(t) for t in e.terms]
