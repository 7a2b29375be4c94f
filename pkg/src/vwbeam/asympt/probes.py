"""Uniqueness and consistency probes over an eps sweep.

Both run the full pipeline, so the pipeline import is deferred to call time
(the pipeline itself imports the norms and the classifier from this package).
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .classify import SweepReport, Verdict, classify_net
from .norms import w_difference


@dataclass(frozen=True)
class ProbeResult:
    label: str
    samples: Tuple[Tuple[float, float], ...]  # (eps, W-difference)
    report: Optional[SweepReport]  # None when every difference is exactly zero
    required_slope: Optional[float] = None

    @property
    def differences(self):
        return np.array([d for _, d in self.samples])

    @property
    def all_zero(self):
        return bool(np.all(self.differences == 0.0))

    @property
    def monotone_decreasing(self):
        d = self.differences
        return bool(np.all(d[1:] < d[:-1])) or self.all_zero

    @property
    def decay_slope(self):
        """Slope of log(difference) against log(eps); +inf for identically zero."""
        if self.all_zero:
            return math.inf
        return -self.report.N if self.report is not None else math.nan

    @property
    def verdict(self):
        if self.all_zero:
            return Verdict("negligible", math.inf)
        return self.report.verdict if self.report is not None else Verdict("inconclusive")

    def summary(self):
        lines = [f"{self.label}: {self.verdict}"]
        if self.required_slope is not None:
            lines.append(f"  decay slope {self.decay_slope:.3g} (required >= {self.required_slope:.3g})")
        lines += [f"  eps={e:<8.4g} diff={d:.6e}" for e, d in self.samples]
        return "\n".join(lines)


def _report(samples, label):
    eps_y = [(e, d) for e, d in samples]
    if len(eps_y) < 4 or any(d <= 0 for _, d in eps_y):
        return None
    return classify_net(eps_y, label=label)


def _eps(scenario, eps_list):
    return sorted(scenario.eps_list if eps_list is None else eps_list, reverse=True)


def uniqueness_probe(scenario, k: Optional[float] = 3, eps_list: Optional[Sequence[float]] = None,
                     n: Optional[int] = None, m: Optional[int] = None) -> ProbeResult:
    """W-distance between runs with c_eps and with c_eps + eps^k.

    ``k=None`` repeats the unperturbed run (identical regularizations).
    The required decay slope is ``k - N_F`` where N_F is the fitted growth
    order of sqrt(D_T exp(T F_T)) over the sweep.
    """
    from ..pipeline import solve

    samples, amp = [], []
    for eps in _eps(scenario, eps_list):
        base = solve(scenario, eps, n, m, reference=False)
        shift = 0.0 if k is None else scenario.effective(eps) ** k
        pert = solve(scenario, eps, n, m, c_shift=shift, energy=False, reference=False)
        samples.append((eps, w_difference(base.trajectory, pert.trajectory, base.system)))
        en = base.energy
        amp.append((eps, math.sqrt(en.D_T * math.exp(en.T * en.F_T))))
    label = f"{scenario.name} uniqueness (k={k})"
    required = None
    if k is not None and len(amp) >= 2:
        e = np.log([a for a, _ in amp])
        y = np.log([b for _, b in amp])
        N_F = -float(np.polyfit(e, y, 1)[0])
        required = k - max(N_F, 0.0)
    return ProbeResult(label, tuple(samples), _report(samples, label), required)


def consistency_probe(scenario, eps_list: Optional[Sequence[float]] = None,
                      n: Optional[int] = None, m: Optional[int] = None) -> ProbeResult:
    """W-distance between the regularized run and the unregularized one on the same mesh."""
    from ..pipeline import solve

    ref = solve(scenario, None, n, m, energy=False, reference=False)
    samples = []
    for eps in _eps(scenario, eps_list):
        run = solve(scenario, eps, n, m, energy=False, reference=False)
        samples.append((eps, w_difference(run.trajectory, ref.trajectory, ref.system)))
    label = f"{scenario.name} consistency"
    return ProbeResult(label, tuple(samples), _report(samples, label))
