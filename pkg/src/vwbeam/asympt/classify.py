"""Asymptotic classification of a net (eps, y_eps) from finitely many samples.

Two fits are made in log space:

* power law   log y = log C - N log eps           (2 parameters)
* log-type    log y = log C + log log(1/eps)      (1 parameter)

The verdict is deterministic:

1. slope of log y against log eps above ``decay_tol``: negligible, with
   q_max the fitted decay order;
2. otherwise log-type when its BIC beats the power law and the apparent N
   is positive (a log(1/eps) net grows slowly as eps -> 0);
3. otherwise moderate(N), with N clipped at 0 for bounded nets.
"""
import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

# below this relative residual a fit is treated as exact (keeps BIC finite)
_SSR_FLOOR = 1e-24


@dataclass(frozen=True)
class Verdict:
    kind: str  # moderate | log-type | negligible | inconclusive
    value: Optional[float] = None  # N for moderate, C for log-type, q_max for negligible

    @property
    def is_moderate(self):
        """Moderate in the wide sense: log-type and negligible nets are moderate too."""
        return self.kind in ("moderate", "log-type", "negligible")

    def __str__(self):
        if self.value is None:
            return self.kind
        label = {"moderate": "N", "log-type": "C", "negligible": "q_max"}[self.kind]
        return f"{self.kind}({label}={self.value:.3g})"


@dataclass(frozen=True)
class SweepReport:
    samples: Tuple[Tuple[float, float], ...]
    fit_moderate: Tuple[float, float, float]  # (C, N, R^2)
    fit_logtype: Optional[Tuple[float, float]]  # (C, R^2), None if some eps >= 1
    verdict: Verdict
    label: str = ""

    @property
    def N(self):
        return self.fit_moderate[1]

    @property
    def tail_N(self):
        """Apparent growth order on the two smallest-eps samples."""
        (e1, y1), (e2, y2) = self.samples[-2:]
        return -math.log(y2 / y1) / math.log(e2 / e1)

    def bounded(self, tol=0.1):
        """Growth at the finest sampled scale is below ``tol`` (flat tail)."""
        return self.tail_N <= tol

    def summary(self):
        C, N, r2 = self.fit_moderate
        lines = [f"{self.label or 'net'}: {self.verdict}",
                 f"  power fit: C={C:.4g} N={N:.4g} R2={r2:.4f}"]
        if self.fit_logtype is not None:
            lines.append(f"  log fit:   C={self.fit_logtype[0]:.4g} R2={self.fit_logtype[1]:.4f}")
        lines += [f"  eps={e:<8.4g} y={y:.6e}" for e, y in self.samples]
        return "\n".join(lines)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "metric"])
            w.writerows(self.samples)


def _r2(y, yhat):
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - yhat) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def _bic(ssr, n, k):
    return n * math.log(max(ssr / n, _SSR_FLOOR)) + k * math.log(n)


def classify_net(samples: Sequence[Tuple[float, float]], decay_tol: float = 0.1,
                 label: str = "") -> SweepReport:
    if len(samples) < 4:
        raise ValueError(f"need at least 4 samples, got {len(samples)}")
    eps = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps must be strictly decreasing")
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    if np.any(~(y > 0)) or not np.all(np.isfinite(y)):
        raise ValueError("metric must be positive and finite")

    n = y.size
    ly, le = np.log(y), np.log(eps)
    slope, icpt = np.polyfit(le, ly, 1)
    fit_pow = ly - (icpt + slope * le)
    ssr_pow = float((fit_pow**2).sum())
    N = -float(slope)
    fit_moderate = (math.exp(icpt), N, _r2(ly, icpt + slope * le))

    fit_log = None
    bic_log = math.inf
    if np.all(eps < 1.0):
        lL = np.log(np.log(1.0 / eps))
        logC = float((ly - lL).mean())
        ssr_log = float(((ly - lL - logC) ** 2).sum())
        fit_log = (math.exp(logC), _r2(ly, logC + lL))
        bic_log = _bic(ssr_log, n, 1)

    if slope > decay_tol:
        verdict = Verdict("negligible", float(slope))
    elif fit_log is not None and N > 0 and bic_log < _bic(ssr_pow, n, 2):
        verdict = Verdict("log-type", fit_log[0])
    else:
        verdict = Verdict("moderate", max(N, 0.0))
    return SweepReport(tuple(zip(eps.tolist(), y.tolist())), fit_moderate, fit_log, verdict, label)
