"""mollify -> assemble -> march -> norms for one scenario and one eps, plus sweeps."""
import functools
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .asympt.classify import SweepReport, classify_net
from .asympt.norms import EnergyConstants, energy_bound_check, error_E_L2, w_norm
from .distmodel import decompose_positive
from .femcore import HermiteSystem, QuadratureSpec, assemble, build_space, project_initial
from .march import TimeGrid, Trajectory, cross_section, newmark_march
from .mollify import (RegularizedField, SeparableField, mollify_expr, mollify_positive,
                      separable_mollify_2d)
from .scenarios import BeamScenario

log = logging.getLogger(__name__)


def worker_count(default=1):
    raw = os.environ.get("VWBEAM_WORKERS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer VWBEAM_WORKERS=%r", raw)
        return default


def shifted(fld: RegularizedField, delta: float) -> RegularizedField:
    """``fld + delta`` (used for the eps^k perturbation of c_eps)."""
    if delta == 0.0:
        return fld
    fn = fld.fn
    const = None if fld.constant is None else fld.constant + delta
    low = None if fld.lower_bound is None else fld.lower_bound + min(delta, 0.0)
    return replace(fld, fn=lambda s: fn(s) + delta, constant=const, lower_bound=low)


@dataclass(frozen=True)
class Fields:
    c: RegularizedField
    b: SeparableField
    g: SeparableField
    f1: RegularizedField
    f2: RegularizedField
    c0: float


def regularize(scenario: BeamScenario, eps: Optional[float]) -> Fields:
    """Mollified coefficients at scale eps (eps=None keeps the data as is)."""
    eps_all = tuple(scenario.eps_list) + (() if eps is None else (eps,))
    c0 = scenario.certified_c0(eps_all)
    ext = max((scenario.effective(e) for e in eps_all), default=0.0)
    decomp = decompose_positive(scenario.c, c0, (-ext, 1.0 + ext))
    net = scenario.net(eps)
    c = mollify_positive(decomp, net, (0.0, 1.0))
    tw = (0.0, scenario.T)
    b = separable_mollify_2d(scenario.b, net, (0.0, 1.0), tw)
    g = separable_mollify_2d(scenario.g, net, (0.0, 1.0), tw)
    f1 = mollify_expr(scenario.f1, net)
    f2 = mollify_expr(scenario.f2, net)
    return Fields(c, b, g, f1, f2, c0)


@dataclass
class RunResult:
    scenario: BeamScenario
    eps: Optional[float]
    eps_effective: Optional[float]
    fields: Fields
    system: HermiteSystem
    trajectory: Trajectory
    w_norm: float
    energy: Optional[EnergyConstants] = None
    e_l2: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    def to_record(self):
        rec = {"scenario": self.scenario.name, "eps": self.eps,
               "eps_effective": self.eps_effective, "n": self.trajectory.mesh.n,
               "m": self.trajectory.grid.m, "T": self.trajectory.grid.T, "c0": self.fields.c0,
               "reparam": self.scenario.reparam, "w_norm": self.w_norm, "e_l2": self.e_l2,
               "quadrature_panels": self.system.panels, "warnings": list(self.warnings)}
        if self.energy is not None:
            rec["energy"] = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                             for k, v in self.energy.as_dict().items()}
        return rec


def solve(scenario: BeamScenario, eps: Optional[float], n: Optional[int] = None,
          m: Optional[int] = None, c_shift: float = 0.0, energy: bool = True,
          reference: bool = True, impl=None, C_half: Optional[float] = None) -> RunResult:
    n = scenario.n if n is None else n
    m = scenario.m if m is None else m
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        flds = regularize(scenario, eps)
        c = shifted(flds.c, c_shift)
        mesh = build_space(n)
        sys = assemble(c, flds.b, flds.g, mesh, QuadratureSpec())
        traj = newmark_march(sys, project_initial(flds.f1, mesh), project_initial(flds.f2, mesh),
                             TimeGrid(m, scenario.T), impl=impl)
    msgs = []
    for w in caught:
        msgs.append(str(w.message))
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    res = RunResult(scenario, eps, scenario.effective(eps), replace(flds, c=c), sys, traj,
                    w_norm(traj, sys), warnings=msgs)
    if energy:
        res.energy = energy_bound_check(traj, sys, c, flds.b, flds.c0 + min(c_shift, 0.0),
                                        C_half=C_half)
    if reference:
        ref = reference_solution(scenario, n, m)
        if ref is not None:
            res.e_l2 = error_E_L2(traj, ref)
    return res


def reference_solution(scenario: BeamScenario, n: int, m: int):
    """Exact u(x, t) if known, else the unregularized reference trajectory, else None."""
    if scenario.exact is not None:
        return scenario.exact_fn()
    ref = scenario.reference_scenario()
    if ref is None:
        return None
    return _reference_trajectory(ref, n, m)


@functools.lru_cache(maxsize=16)
def _reference_trajectory(ref: BeamScenario, n: int, m: int) -> Trajectory:
    return solve(ref, None, n, m, energy=False, reference=False).trajectory


@dataclass(frozen=True)
class SweepRow:
    eps: float
    w_norm: float
    e_l2: Optional[float]
    margin: float
    record: dict
    t: np.ndarray
    u_mid: np.ndarray  # cross-section at x = 0.5


def _sweep_point(scenario, eps, n, m):
    res = solve(scenario, eps, n, m)
    t, u = cross_section(res.trajectory, 0.5)
    margin = res.energy.margin if res.energy is not None else math.nan
    return SweepRow(eps, res.w_norm, res.e_l2, margin, res.to_record(), t, u)


@dataclass
class SweepResult:
    scenario: BeamScenario
    rows: List[SweepRow]
    report: SweepReport


def sweep(scenario: BeamScenario, eps_list: Optional[Sequence[float]] = None,
          n: Optional[int] = None, m: Optional[int] = None,
          workers: Optional[int] = None) -> SweepResult:
    """Solve at every eps (largest first) and classify the W-norm net."""
    eps_list = sorted(scenario.eps_list if eps_list is None else eps_list, reverse=True)
    n = scenario.n if n is None else n
    m = scenario.m if m is None else m
    workers = worker_count() if workers is None else workers
    args = [(scenario, e, n, m) for e in eps_list]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(args))) as ex:
            rows = list(ex.map(_sweep_point, *zip(*args)))
    else:
        rows = [_sweep_point(*a) for a in args]
    report = classify_net([(r.eps, r.w_norm) for r in rows], label=f"{scenario.name} W-norm") \
        if len(rows) >= 4 else None
    return SweepResult(scenario, rows, report)


@dataclass(frozen=True)
class ConvergenceResult:
    sizes: Tuple[int, ...]
    errors: Tuple[float, ...]
    slope: float

    @property
    def strictly_decreasing(self):
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))


def fitted_rate(sizes, errors):
    """Least-squares slope of log E against log h (h = 1/n)."""
    h = 1.0 / np.asarray(sizes, dtype=float)
    return float(np.polyfit(np.log(h), np.log(np.asarray(errors, dtype=float)), 1)[0])


def convergence(scenario: BeamScenario, sizes=(32, 64, 128, 256), eps: Optional[float] = None,
                workers: Optional[int] = None) -> ConvergenceResult:
    """E_L2 against the scenario's exact solution on n = m meshes."""
    if scenario.exact is None:
        raise ValueError(f"scenario {scenario.name!r} has no exact solution")
    workers = worker_count() if workers is None else workers
    args = [(scenario, eps, k) for k in sizes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(args))) as ex:
            errors = list(ex.map(_convergence_point, *zip(*args)))
    else:
        errors = [_convergence_point(*a) for a in args]
    return ConvergenceResult(tuple(sizes), tuple(errors), fitted_rate(sizes, errors))


def _convergence_point(scenario, eps, k):
    return solve(scenario, eps, k, k, energy=False).e_l2
