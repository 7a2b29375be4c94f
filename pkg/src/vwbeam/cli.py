"""Command line front end: ``vwbeam {run,sweep,convergence,report}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import kernels
from .distmodel import ExpressionError, NotProvablyPositive, QuadratureError
from .march import NumericalFailure, write_cross_section_csv, write_surface_csv
from .mollify import PositivityCheckError, WindowError
from .pipeline import convergence, solve, sweep
from .scenarios import CATALOG, ConfigError, builtin, load_config
from .asympt.norms import spatial_norms

log = logging.getLogger("vwbeam")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
_UNSET = object()
_CONFIG_ERRORS = (ConfigError, ExpressionError, WindowError, NotProvablyPositive,
                  PositivityCheckError)
_NUMERIC_ERRORS = (NumericalFailure, kernels.SingularPivotError, QuadratureError,
                   FloatingPointError, np.linalg.LinAlgError)


def _float_list(text):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text):
    return [int(v) for v in _float_list(text)]


def _eps_arg(text):
    if text.lower() in ("none", "0", "exact"):
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"eps must be a number or 'none', got {text!r}")


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _scenario(args):
    if args.config:
        sc = load_config(args.config)
    else:
        name = args.scenario_flag or args.scenario
        if not name:
            raise ConfigError("give a built-in scenario name or --config FILE "
                              f"(built-ins: {', '.join(CATALOG)})")
        sc = builtin(name)
    kw = {}
    if getattr(args, "n", None) is not None:
        kw["n"] = args.n
    if getattr(args, "m", None) is not None:
        kw["m"] = args.m
    if getattr(args, "eps_list", None):
        kw["eps_list"] = tuple(args.eps_list)
    if getattr(args, "reparam", None):
        kw["reparam"] = args.reparam
    return sc.with_overrides(**kw) if kw else sc


def _outdir(args, *parts):
    out = Path(args.out).joinpath(*parts)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args):
    sc = _scenario(args)
    eps = args.eps if args.eps_given else min(sc.eps_list)
    res = solve(sc, eps)
    tag = "exact" if eps is None else f"eps{eps:g}"
    out = _outdir(args, sc.name, f"run-n{sc.n}-m{sc.m}-{tag}")
    write_surface_csv(res.trajectory, out / "surface.csv")
    write_cross_section_csv(res.trajectory, out / "cross_section.csv", 0.5)
    l2, h1, h2 = spatial_norms(res.trajectory.U, res.system)
    with open(out / "norms.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "l2", "h1", "h2"])
        for row in zip(res.trajectory.grid.nodes, l2, h1, h2):
            w.writerow([f"{v:.10g}" for v in row])
    rec = res.to_record()
    rec["kind"] = "run"
    (out / "record.json").write_text(json.dumps(_json_safe(rec), indent=2))
    if res.energy is not None:
        (out / "energy.txt").write_text(res.energy.summary() + "\n")
    msg = f"{sc.name} n={sc.n} m={sc.m} eps={eps} W={res.w_norm:.6e}"
    if res.e_l2 is not None:
        msg += f" E_L2={res.e_l2:.6e}"
    if res.energy is not None:
        msg += f" margin={res.energy.margin:.4g}"
    print(msg)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sweep(args):
    sc = _scenario(args)
    result = sweep(sc)
    out = _outdir(args, sc.name, f"sweep-n{sc.n}-m{sc.m}")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "w_norm", "e_l2", "margin"])
        for r in result.rows:
            w.writerow([f"{r.eps:g}", f"{r.w_norm:.10e}",
                        "" if r.e_l2 is None else f"{r.e_l2:.10e}", f"{r.margin:.10e}"])
    with open(out / "cross_sections.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"u_eps{r.eps:g}" for r in result.rows])
        for k, t in enumerate(result.rows[0].t):
            w.writerow([f"{t:.6g}"] + [f"{r.u_mid[k]:.10e}" for r in result.rows])
    summary = result.report.summary() if result.report is not None else "fewer than 4 samples"
    (out / "classification.txt").write_text(summary + "\n")
    doc = {"kind": "sweep", "scenario": sc.name, "n": sc.n, "m": sc.m, "reparam": sc.reparam,
           "rows": [r.record for r in result.rows],
           "verdict": None if result.report is None else str(result.report.verdict)}
    (out / "sweep.json").write_text(json.dumps(_json_safe(doc), indent=2))
    print(f"{'eps':>8} {'w_norm':>14} {'e_l2':>14} {'margin':>12}")
    for r in result.rows:
        e = "-" if r.e_l2 is None else f"{r.e_l2:.6e}"
        print(f"{r.eps:>8g} {r.w_norm:>14.6e} {e:>14} {r.margin:>12.4g}")
    print(summary)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_convergence(args):
    args.scenario = args.scenario or "regular"
    sc = _scenario(args)
    sizes = args.sizes
    res = convergence(sc, sizes, eps=args.eps if args.eps_given else None)
    out = _outdir(args, sc.name, "convergence")
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "m", "e_l2"])
        for k, e in zip(res.sizes, res.errors):
            w.writerow([k, k, f"{e:.10e}"])
    doc = {"kind": "convergence", "scenario": sc.name, "sizes": list(res.sizes),
           "errors": list(res.errors), "rate": res.slope,
           "strictly_decreasing": res.strictly_decreasing}
    (out / "convergence.json").write_text(json.dumps(doc, indent=2))
    for k, e in zip(res.sizes, res.errors):
        print(f"n=m={k:<5d} E_L2={e:.6e}")
    print(f"fitted rate {res.slope:.4f}; strictly decreasing: {res.strictly_decreasing}")
    print(f"wrote {out}")
    return EXIT_OK


def _collect(root):
    for path in sorted(Path(root).rglob("*.json")):
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            log.warning("skipping unreadable %s", path)
            continue
        if isinstance(doc, dict) and doc.get("kind") in ("run", "sweep", "convergence"):
            yield path, doc


def cmd_report(args):
    roots = args.paths or [args.out]
    groups = {}
    for root in roots:
        for path, doc in _collect(root):
            groups.setdefault(doc["scenario"], []).append((path, doc))
    if not groups:
        print(f"no results under {', '.join(map(str, roots))}")
        return EXIT_OK
    for name in sorted(groups):
        print(f"== {name}")
        for path, doc in groups[name]:
            kind = doc["kind"]
            if kind == "run":
                e = doc.get("e_l2")
                print(f"  run   n={doc['n']} m={doc['m']} eps={doc['eps']} W={doc['w_norm']:.6e}"
                      + ("" if e is None else f" E_L2={e:.6e}"))
            elif kind == "sweep":
                print(f"  sweep n={doc['n']} m={doc['m']} verdict={doc['verdict']}")
                for r in doc["rows"]:
                    m = (r.get("energy") or {}).get("margin")
                    e = r.get("e_l2")
                    print(f"        eps={r['eps']:<6g} W={r['w_norm']:.6e}"
                          + ("" if e is None else f" E_L2={e:.6e}")
                          + ("" if m is None else f" margin={m:.4g}"))
            else:
                print(f"  convergence sizes={doc['sizes']} rate={doc['rate']:.4f}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="vwbeam", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sizes=False):
        sp.add_argument("scenario", nargs="?", help=f"built-in scenario ({', '.join(CATALOG)})")
        sp.add_argument("--scenario", dest="scenario_flag", help="same as the positional name")
        sp.add_argument("--config", help="TOML scenario file")
        sp.add_argument("--out", default="runs", help="output directory (default: runs)")
        sp.add_argument("--reparam", choices=("identity", "log", "loglog"))
        if not sizes:
            sp.add_argument("--n", type=int, help="number of elements")
            sp.add_argument("--m", type=int, help="number of time steps")
        sp.add_argument("--eps", type=_eps_arg, default=_UNSET,
                        help="mollifier scale ('none' = unregularized)")
        sp.add_argument("--eps-list", type=_float_list, help="comma-separated eps values")

    common(sub.add_parser("run", help="solve one scenario at one eps"))
    common(sub.add_parser("sweep", help="solve over an eps list and classify the W-norm net"))
    conv = sub.add_parser("convergence", help="E_L2 against the exact solution on n = m meshes")
    common(conv, sizes=True)
    conv.add_argument("--sizes", type=_int_list, default=[32, 64, 128, 256])
    rep = sub.add_parser("report", help="summarize stored results")
    rep.add_argument("paths", nargs="*", help="result directories (default: --out)")
    rep.add_argument("--out", default="runs")
    return p


_COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "convergence": cmd_convergence,
             "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args.eps_given = getattr(args, "eps", _UNSET) is not _UNSET
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return _COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
