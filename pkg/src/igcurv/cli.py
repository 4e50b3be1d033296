"""Command-line front end: verify identity suites, compute tensors, tabulate, study FD convergence.

Exit codes: 0 success, 1 identity failure (report still written), 2 usage or spec error.
"""

import argparse
import csv
import io
import itertools
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .chart_core import ALGEBRAIC_TOL, as_point, default_step, scale_floor
from .connections import torsion_from_gamma
from .curvature import CurvaturePoint
from .einstein import NABLA, NABLA_STAR, alpha_einstein_at, einstein_at, h_tensor_at
from .errors import DomainEscape, IgcurvError
from .identities import ALGEBRAIC, DIFFERENTIAL, REGISTRY, Context, identities_for
from .manifold_zoo import load_spec

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_SWEEP = (1e-2, 5e-3, 2.5e-3)
ORDER_RANGE = (1.8, 2.2)

# name -> (index convention, slot variances)
TENSORS = {
    "riemann": ("R[m,k,j,i]: component k of R(d_j, d_i) d_m", ("lower", "upper", "lower", "lower")),
    "ricci": ("Ric[m,i] = R[m,j,j,i]", ("lower", "lower")),
    "scalar": ("g^mi Ric[m,i]", ()),
    "einstein": ("G[i,j] = Ric[i,j] - 1/2 R g[i,j]", ("lower", "lower")),
    "alpha_einstein": ("G_alpha[i,j] from the alpha-connection", ("lower", "lower")),
    "K": ("K[m,k,i] = Gamma*^m_ki - Gamma^m_ki", ("upper", "lower", "lower")),
    "C": ("C[k,i,j] = (nabla_k g)_ij", ("lower", "lower", "lower")),
    "T": ("T[i,k,l] = Gamma^i_lk - Gamma^i_kl", ("upper", "lower", "lower")),
    "T_star": ("T*[i,k,l] = Gamma*^i_lk - Gamma*^i_kl", ("upper", "lower", "lower")),
    "H": ("H[i,j] = kappa_(ij) - 1/2 g[i,j] trace(kappa)", ("lower", "lower")),
}


def _fmt(v):
    """Nine significant digits for human-readable tables."""
    return f"{v:.9g}"


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _ordered_map(fn, items, threads):
    """fn over items, results in input order whatever the thread count."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what} must be comma-separated numbers") from None


# ---------------------------------------------------------------- verify

def _point_residuals(bundle, ids, h):
    def run(x):
        ctx = Context(bundle, x, h)
        with scale_floor(ctx.magnitude):
            return [idn.evaluate(ctx) for idn in ids]
    return run


def verify_report(bundle, points=20, seed=0, h=None, threads=1, names=None):
    """Evaluate every applicable identity on sampled points; returns the report dict."""
    start = time.perf_counter()
    ids = identities_for(bundle, names)
    pts = bundle.points(points, seed)
    per_point = _ordered_map(_point_residuals(bundle, ids, h), pts, threads)
    rows = []
    for k, idn in enumerate(ids):
        vals = [float(r[k]) for r in per_point if r[k] is not None]
        worst = max(vals) if vals else 0.0
        if not vals:
            status = "skipped"
        else:
            status = "pass" if worst <= idn.tolerance else "fail"
        rows.append({"name": idn.name, "anchor": idn.anchor, "class": idn.cls,
                     "points_sampled": len(vals), "max_residual": worst,
                     "tolerance": idn.tolerance, "status": status})
    return {
        "manifold": bundle.name, "kind": bundle.kind, "dim": bundle.dim,
        "points": points, "seed": seed, "h": h if h is not None else default_step(),
        "identities": rows,
        "passed": all(r["status"] != "fail" for r in rows),
        "wall_time": time.perf_counter() - start,
    }


def _verify_text(report):
    lines = [f"manifold {report['manifold']} kind {report['kind']} dim {report['dim']} "
             f"points {report['points']} seed {report['seed']} h {_fmt(report['h'])}"]
    width = max(len(r["name"]) for r in report["identities"]) if report["identities"] else 4
    for r in report["identities"]:
        lines.append(f"{r['status'].upper():7s} {r['name']:{width}s} {r['class']:12s} "
                     f"{_fmt(r['max_residual']):>16s} <= {_fmt(r['tolerance']):8s} "
                     f"n={r['points_sampled']}")
    failed = [r["name"] for r in report["identities"] if r["status"] == "fail"]
    if failed:
        lines.append(f"first failure: {failed[0]} ({len(failed)} failed)")
    lines.append(f"{'PASS' if report['passed'] else 'FAIL'} in {report['wall_time']:.2f}s")
    return "\n".join(lines) + "\n"


VERIFY_COLUMNS = ("name", "anchor", "class", "points_sampled", "max_residual", "tolerance",
                  "status")


def cmd_verify(args):
    bundle = load_spec(args.spec)
    report = verify_report(bundle, args.points, args.seed, args.h, args.threads)
    if args.json:
        text = json.dumps(report, indent=2) + "\n"
    elif args.csv:
        text = _csv_text(VERIFY_COLUMNS, [[repr(r[c]) if isinstance(r[c], float) else r[c]
                                           for c in VERIFY_COLUMNS]
                                          for r in report["identities"]])
    else:
        text = _verify_text(report)
    _write(text, args.out)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# ---------------------------------------------------------------- compute and table

def check_stencil(bundle, x, h=None):
    """Raise DomainEscape unless x and its central-difference stencil lie in the domain."""
    base = h if h is not None else default_step()
    if not bundle.domain.contains(x):
        raise DomainEscape(f"point {x.tolist()} lies outside the chart domain", x)
    for a in range(x.shape[0]):
        e = np.zeros_like(x)
        e[a] = base * max(1.0, abs(float(x[a])))
        for q in (x + e, x - e):
            if not bundle.domain.contains(q):
                raise DomainEscape(f"stencil point {q.tolist()} lies outside the chart domain", q)


def tensor_at(bundle, name, x, alpha=0.0, dual=False):
    """Named tensor at a point; dual selects the nabla* version of curvature quantities."""
    pt = CurvaturePoint(bundle, x)
    which = NABLA_STAR if dual else NABLA
    if name == "riemann":
        return pt.R_star if dual else pt.R
    if name == "ricci":
        return pt.ric_star if dual else pt.ric
    if name == "scalar":
        return np.asarray(pt.scalar_star if dual else pt.scalar)
    if name == "einstein":
        return einstein_at(pt, which)
    if name == "alpha_einstein":
        return alpha_einstein_at(pt, alpha)
    if name == "K":
        return pt.K
    if name == "C":
        return pt.C_star if dual else pt.C
    if name == "T":
        return torsion_from_gamma(pt.gamma)
    if name == "T_star":
        return torsion_from_gamma(pt.gamma_star)
    if name == "H":
        return h_tensor_at(pt)
    raise ValueError(f"unknown tensor {name!r}")


def _components(arr):
    arr = np.asarray(arr, dtype=float)
    return float(arr) if arr.ndim == 0 else arr.tolist()


def cmd_compute(args):
    bundle = load_spec(args.spec)
    x = as_point(args.at, bundle.dim)
    check_stencil(bundle, x, args.h)
    arr = tensor_at(bundle, args.tensor, x, args.alpha, args.dual)
    convention, variance = TENSORS[args.tensor]
    out = {"manifold": bundle.name, "kind": bundle.kind, "tensor": args.tensor,
           "connection": NABLA_STAR if args.dual else NABLA, "point": x.tolist(),
           "convention": convention, "variance": list(variance),
           "shape": list(np.shape(arr)), "components": _components(arr)}
    if args.tensor == "alpha_einstein":
        out["alpha"] = args.alpha
    _write(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK


def _axis(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid axis {text!r} must be lo:hi:count")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid axis {text!r} must be lo:hi:count") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"grid axis {text!r} needs a positive count")
    return np.linspace(lo, hi, n)


def table_rows(bundle, tensor, axes, alpha=0.0, dual=False, h=None, threads=1):
    """Rows (coords..., indices..., value), lexicographic in grid then indices."""
    if len(axes) != bundle.dim:
        raise ValueError(f"expected {bundle.dim} grid axes, got {len(axes)}")
    grid = [np.array(p) for p in itertools.product(*axes)]
    for x in grid:
        check_stencil(bundle, x, h)
    values = _ordered_map(lambda x: np.asarray(tensor_at(bundle, tensor, x, alpha, dual)),
                          grid, threads)
    rows = []
    for x, arr in zip(grid, values):
        for idx in np.ndindex(arr.shape):
            rows.append([*map(float, x), *idx, float(arr[idx])])
    return rows


def cmd_table(args):
    bundle = load_spec(args.spec)
    rows = table_rows(bundle, args.tensor, args.grid, args.alpha, args.dual, args.h,
                      args.threads)
    rank = len(TENSORS[args.tensor][1])
    header = ([f"x{a}" for a in range(bundle.dim)] + [f"i{r}" for r in range(rank)]
              + ["value"])
    if args.json:
        text = json.dumps({"manifold": bundle.name, "tensor": args.tensor,
                           "columns": header, "rows": rows}, indent=2) + "\n"
    else:
        text = _csv_text(header, [[repr(v) if isinstance(v, float) else v for v in r]
                                  for r in rows])
    _write(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- convergence

def fit_order(hs, residuals):
    """Least-squares slope of log residual against log h, or None below rounding level."""
    r = np.asarray(residuals, dtype=float)
    if len(r) < 2 or np.all(r <= ALGEBRAIC_TOL) or np.any(r <= 0):
        return None
    return float(np.polyfit(np.log(hs), np.log(r), 1)[0])


def convergence_report(bundle, identity, hs, points=5, seed=0, threads=1):
    idn = REGISTRY[identity]
    if not idn.applies_to(bundle):
        raise ValueError(f"identity {identity!r} does not apply to {bundle.kind} bundles")
    pts = bundle.points(points, seed)
    residuals = []
    for h in hs:
        vals = _ordered_map(lambda x, h=h: _point_residuals(bundle, [idn], h)(x)[0], pts,
                            threads)
        vals = [v for v in vals if v is not None]
        if not vals:
            raise ValueError(f"identity {identity!r} is not applicable at any sampled point")
        residuals.append(max(vals))
    order = fit_order(hs, residuals)
    observed = "plateau" if order is None else "order"
    if idn.cls == ALGEBRAIC:
        expected_ok = observed == "plateau"
    else:
        expected_ok = order is not None and ORDER_RANGE[0] <= order <= ORDER_RANGE[1]
    return {"manifold": bundle.name, "kind": bundle.kind, "identity": identity,
            "class": idn.cls, "h": list(hs), "residuals": residuals,
            "observed": observed, "order": order, "expected": expected_ok}


def _convergence_text(rep):
    lines = [f"{rep['identity']} ({rep['class']}) on {rep['manifold']}",
             f"{'h':>16s} {'residual':>16s} {'ratio':>16s}"]
    prev = None
    for h, r in zip(rep["h"], rep["residuals"]):
        ratio = "" if prev in (None, 0.0) else _fmt(r / prev)
        lines.append(f"{_fmt(h):>16s} {_fmt(r):>16s} {ratio:>16s}")
        prev = r
    if rep["order"] is None:
        lines.append("plateau at rounding level")
    else:
        lines.append(f"fitted order p = {_fmt(rep['order'])}")
    lines.append("matches expected class" if rep["expected"] else "does NOT match expected class")
    return "\n".join(lines) + "\n"


def cmd_convergence(args):
    if args.identity not in REGISTRY:
        sys.stderr.write(f"unknown identity {args.identity!r}; valid names:\n")
        sys.stderr.write("\n".join(f"  {n}" for n in REGISTRY) + "\n")
        return EXIT_USAGE
    hs = args.h_sweep
    if len(hs) < 2 or any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
        sys.stderr.write("--h-sweep needs at least two positive, strictly decreasing steps\n")
        return EXIT_USAGE
    bundle = load_spec(args.spec)
    rep = convergence_report(bundle, args.identity, hs, args.points, args.seed, args.threads)
    if args.json:
        text = json.dumps(rep, indent=2) + "\n"
    elif args.csv:
        text = _csv_text(("h", "residual"), [[repr(h), repr(r)]
                                             for h, r in zip(rep["h"], rep["residuals"])])
    else:
        text = _convergence_text(rep)
    _write(text, args.out)
    return EXIT_OK if rep["expected"] else EXIT_FAIL


# ---------------------------------------------------------------- parser

def _threads(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be at least 1")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="igcurv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=True):
        sp.add_argument("spec", help="built-in 'name:key=val,...' or a JSON manifold file")
        sp.add_argument("--h", type=float, default=None, help="finite-difference step")
        sp.add_argument("--out", default=None, help="write the report here instead of stdout")
        sp.add_argument("--threads", type=_threads, default=1)
        if formats:
            fmt = sp.add_mutually_exclusive_group()
            fmt.add_argument("--json", action="store_true")
            fmt.add_argument("--csv", action="store_true")

    v = sub.add_parser("verify", help="check every applicable identity")
    common(v)
    v.add_argument("--points", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(run=cmd_verify)

    for name, fn, helptext in (("compute", cmd_compute, "tensor components at a point"),
                               ("table", cmd_table, "tensor components over a grid")):
        sp = sub.add_parser(name, help=helptext)
        common(sp, formats=name == "table")
        sp.add_argument("--tensor", required=True, choices=sorted(TENSORS))
        sp.add_argument("--alpha", type=float, default=0.0)
        sp.add_argument("--dual", action="store_true", help="use nabla* for curvature")
        if name == "compute":
            sp.add_argument("--at", required=True, type=lambda s: _floats(s, "--at"))
        else:
            sp.add_argument("--grid", required=True, type=_axis, action="append",
                            help="lo:hi:count, once per axis")
        sp.set_defaults(run=fn)

    c = sub.add_parser("convergence", help="residual against h with fitted order")
    common(c)
    c.add_argument("--identity", required=True)
    c.add_argument("--h-sweep", type=lambda s: _floats(s, "--h-sweep"),
                   default=list(DEFAULT_SWEEP))
    c.add_argument("--points", type=int, default=5)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(run=cmd_convergence)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.run(args)
    except DomainEscape as exc:
        sys.stderr.write(f"igcurv: {exc}\n")
        return EXIT_USAGE
    except (IgcurvError, ValueError, OSError) as exc:
        sys.stderr.write(f"igcurv: {exc}\n")
        return EXIT_USAGE


__all__ = ["main", "build_parser", "verify_report", "convergence_report", "table_rows",
           "tensor_at", "check_stencil", "fit_order", "TENSORS", "DIFFERENTIAL", "ALGEBRAIC"]
