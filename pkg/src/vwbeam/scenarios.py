"""Beam scenarios: the built-in catalog and TOML configuration files.

A config file looks like::

    name = "mycase"

    [coefficients]
    c  = [{kind = "constant", value = 1.0}, {kind = "dirac", x0 = 0.5}]
    b  = [{kind = "constant", value = 1.0}]
    g  = [{kind = "product", x = {kind = "constant", value = 1.0}, t = {kind = "dirac", x0 = 0.2}}]
    f1 = []
    f2 = []

    [discretization]
    n = 256
    m = 128
    T = 1.0

    [sweep]
    eps_list = [0.2, 0.1, 0.05, 0.01]
    reparam = "identity"

    [reference]
    exact = "sin(t)*x**2*(x-1)**2"       # or
    c = [{kind = "constant", value = 1.0}]  # coefficient overrides, solved unregularized
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .distmodel import (_SMOOTH_NAMESPACE, Constant, Dirac, DistributionalExpr, ExpressionError,
                        NegLog, Product, Smooth, certified_lower_bound, expr, from_records,
                        to_records)
from .mollify import MollifierNet, effective_epsilon

DEFAULT_EPS = (0.2, 0.1, 0.05, 0.01)
_FIELDS = ("c", "b", "g", "f1", "f2")
_ARITY = {"c": "x", "b": "xt", "g": "xt", "f1": "x", "f2": "x"}


class ConfigError(ValueError):
    """Invalid scenario configuration (reported with the offending field)."""


def compile_exact(source: str):
    """Vectorized ``u(x, t)`` from a numpy expression string."""
    try:
        code = compile(source, "<exact solution>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"reference.exact: cannot parse {source!r}: {exc}") from None
    bad = [n for n in code.co_names if n not in _SMOOTH_NAMESPACE and n not in ("x", "t")]
    if bad:
        raise ConfigError(f"reference.exact: unknown names {bad}")

    def u(x, t):
        ns = dict(_SMOOTH_NAMESPACE, x=np.asarray(x, float), t=np.asarray(t, float))
        out = eval(code, {"__builtins__": {}}, ns)
        return np.broadcast_to(out, np.broadcast(ns["x"], ns["t"]).shape)

    return u


def _zero(arity):
    return DistributionalExpr((Constant(0.0, "x" if arity != "t" else "t"),), arity)


@dataclass(frozen=True)
class BeamScenario:
    name: str
    c: DistributionalExpr
    b: DistributionalExpr = field(default_factory=lambda: _zero("xt"))
    g: DistributionalExpr = field(default_factory=lambda: _zero("xt"))
    f1: DistributionalExpr = field(default_factory=lambda: _zero("x"))
    f2: DistributionalExpr = field(default_factory=lambda: _zero("x"))
    T: float = 1.0
    n: int = 256
    m: int = 128
    eps_list: Tuple[float, ...] = DEFAULT_EPS
    reparam: str = "identity"
    reparam_N: int = 1
    c0: Optional[float] = None
    exact: Optional[str] = None
    # coefficient overrides defining an unregularized reference problem
    reference: Tuple[Tuple[str, DistributionalExpr], ...] = ()

    def __post_init__(self):
        for name in _FIELDS:
            if getattr(self, name).arity != _ARITY[name]:
                raise ConfigError(f"coefficients.{name}: expected arity {_ARITY[name]!r}")
        if self.n < 2 or self.m < 2:
            raise ConfigError("discretization: n and m must be >= 2")
        if not self.T > 0:
            raise ConfigError("discretization.T must be positive")
        if any(not e > 0 for e in self.eps_list):
            raise ConfigError("sweep.eps_list: all eps must be positive")
        object.__setattr__(self, "eps_list", tuple(sorted(self.eps_list, reverse=True)))
        if self.exact is not None:
            compile_exact(self.exact)

    def net(self, eps) -> Optional[MollifierNet]:
        return None if eps is None else MollifierNet(float(eps), self.reparam, self.reparam_N)

    def effective(self, eps):
        return None if eps is None else effective_epsilon(self.net(eps))

    def with_overrides(self, **kw):
        return replace(self, **kw)

    def reference_scenario(self) -> Optional["BeamScenario"]:
        if not self.reference:
            return None
        return replace(self, name=f"{self.name}-reference", reference=(), exact=None,
                       **dict(self.reference))

    def exact_fn(self):
        return None if self.exact is None else compile_exact(self.exact)

    def certified_c0(self, eps_list=None) -> float:
        """c0 from the regular part of c on the window widened by the largest bump."""
        if self.c0 is not None:
            return float(self.c0)
        eps_list = self.eps_list if eps_list is None else eps_list
        ext = max((self.effective(e) for e in eps_list), default=0.0)
        c0 = certified_lower_bound(self.c, (-ext, 1.0 + ext))
        return c0

    def to_dict(self):
        d = {"name": self.name,
             "coefficients": {k: to_records(getattr(self, k)) for k in _FIELDS},
             "discretization": {"n": self.n, "m": self.m, "T": self.T},
             "sweep": {"eps_list": list(self.eps_list), "reparam": self.reparam,
                       "reparam_N": self.reparam_N}}
        ref = {}
        if self.exact:
            ref["exact"] = self.exact
        for k, v in self.reference:
            ref[k] = to_records(v)
        if ref:
            d["reference"] = ref
        if self.c0 is not None:
            d["c0"] = self.c0
        return d


def _regular():
    g = expr(Product(Smooth("24 + 12*x**2 - 12*x + 2 - x**2*(x - 1)**2", "x"),
                     Smooth("sin(t)", "t")))
    return BeamScenario("regular", c=expr(Constant(1.0)), b=expr(Constant(1.0), arity="xt"),
                        g=g, n=256, m=256, exact="sin(t)*x**2*(x-1)**2")


CATALOG = {
    "regular": _regular(),
    "logC": BeamScenario("logC", c=expr(NegLog(0.5)), b=expr(Constant(1.0), arity="xt"),
                         g=expr(Constant(1.0), arity="xt"), n=256, m=128),
    "deltaC": BeamScenario("deltaC", c=expr(Constant(1.0), Dirac(0.5)),
                           b=expr(Constant(1.0), arity="xt"), g=expr(Constant(1.0), arity="xt"),
                           n=256, m=128, reference=(("c", expr(Constant(1.0))),)),
    "deltaB": BeamScenario("deltaB", c=expr(Constant(1.0)), b=expr(Dirac(0.5), arity="xt"),
                           g=expr(Constant(1.0), arity="xt"), n=256, m=128),
    "deltaTG": BeamScenario("deltaTG", c=expr(Constant(1.0)), b=expr(Constant(1.0), arity="xt"),
                            g=expr(Dirac(0.2, 1.0, "t"), arity="xt"), n=128, m=256),
}


def builtin(name: str) -> BeamScenario:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; built-ins: {sorted(CATALOG)}") from None


def _section(doc, name):
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def scenario_from_dict(doc: dict, base: Optional[BeamScenario] = None) -> BeamScenario:
    known = {"name", "base", "coefficients", "discretization", "sweep", "reference", "c0"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown top-level key(s): {sorted(extra)}")
    if base is None and "base" in doc:
        base = builtin(str(doc["base"]))
    kw = {}
    coeffs = _section(doc, "coefficients")
    for key, recs in coeffs.items():
        if key not in _FIELDS:
            raise ConfigError(f"coefficients.{key}: unknown coefficient (use {_FIELDS})")
        if not isinstance(recs, list):
            raise ConfigError(f"coefficients.{key}: expected a list of term tables")
        try:
            kw[key] = from_records(recs, _ARITY[key]) if recs else _zero(_ARITY[key])
        except ExpressionError as exc:
            raise ConfigError(f"coefficients.{key}: {exc}") from None
    disc = _section(doc, "discretization")
    for key, typ in (("n", int), ("m", int), ("T", float)):
        if key in disc:
            try:
                kw[key] = typ(disc[key])
            except (TypeError, ValueError):
                raise ConfigError(f"discretization.{key}: expected {typ.__name__}") from None
    if set(disc) - {"n", "m", "T"}:
        raise ConfigError(f"discretization: unknown key(s) {sorted(set(disc) - {'n', 'm', 'T'})}")
    sweep = _section(doc, "sweep")
    if "eps_list" in sweep:
        try:
            kw["eps_list"] = tuple(float(e) for e in sweep["eps_list"])
        except (TypeError, ValueError):
            raise ConfigError("sweep.eps_list: expected a list of numbers") from None
    if "reparam" in sweep:
        if sweep["reparam"] not in ("identity", "log", "loglog"):
            raise ConfigError(f"sweep.reparam: unknown scheme {sweep['reparam']!r}")
        kw["reparam"] = sweep["reparam"]
    if "reparam_N" in sweep:
        kw["reparam_N"] = int(sweep["reparam_N"])
    ref = dict(_section(doc, "reference"))
    if ref:
        kw["exact"] = ref.pop("exact", None)
        overrides = []
        for key, recs in ref.items():
            if key not in _FIELDS:
                raise ConfigError(f"reference.{key}: unknown coefficient")
            try:
                overrides.append((key, from_records(recs, _ARITY[key])))
            except ExpressionError as exc:
                raise ConfigError(f"reference.{key}: {exc}") from None
        kw["reference"] = tuple(overrides)
    if "c0" in doc:
        kw["c0"] = float(doc["c0"])
    if base is None:
        if "c" not in kw:
            raise ConfigError("coefficients.c is required")
        return BeamScenario(str(doc.get("name", "custom")), **kw)
    return replace(base, name=str(doc.get("name", base.name)), **kw)


def load_config(path) -> BeamScenario:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return scenario_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
