"""Command-line surface for communicability and sensitivity analyses.

Subcommands
-----------
- ``communicability``: global totals and the Perron-based summary of a graph.
- ``rank``: top-k perturbation directions under a chosen criterion.
- ``sensitivity``: one direction, one value, with work counters.
- ``compare``: every Krylov estimator against the dense oracle, with
  per-direction scatter rows and per-method step averages.
- ``validate``: the bundled frozen-value regression suite.

Output is deterministic byte-for-byte for identical requests: fixed start
vectors, fixed tie-breaking, fixed column orders. The only nondeterministic
quantity (wall-clock time in ``compare``) is written to stderr so that
stdout and ``--out`` files stay reproducible.

Exit codes: 0 success; 1 usage error; 2 data error (unreadable or malformed
input, invalid node ids); 3 numerical failure (non-convergence, breakdown,
dense-path size limit, or a failed validation check).
"""

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import dense as _dense
from .dense import SizeLimitError
from .golden import run_validation
from .graph import (Direction, GraphFormatError, PerturbedOperator,
                    direction_candidates, is_strongly_connected,
                    parse_edge_list, parse_matrix_market)
from .krylov import (ConvergenceError, ESTIMATORS, METHOD_NAMES,
                     EstimatorConfig, SeriousBreakdownError, scan_estimated)
from .perron import (PerronError, perron_communicability,
                     perron_root_sensitivity, perron_sensitivity,
                     perron_triple, select_delta, top_k_root_sensitivities)
from .results import SensitivityRecord, sort_records

SCHEMA = "commsens/1"
FILTERS = {"existing-edges": "existing", "non-edges": "absent", "all": "all"}
RANK_METHODS = ("spr", "spn", "exact") + METHOD_NAMES


class _DataError(Exception):
    """Bad user data that is not a parse error (e.g. node id out of range)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_io_flags(p):
    p.add_argument("--format", choices=("table", "csv", "json"),
                   default="table", help="output format (default: table)")
    p.add_argument("--out", metavar="PATH",
                   help="write the report to PATH instead of stdout")


def _add_graph_arg(p):
    p.add_argument("graph", metavar="GRAPH",
                   help="edge-list or MatrixMarket file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--directed", action="store_true",
                   help="treat the input as directed (edge-list default)")
    g.add_argument("--undirected", action="store_true",
                   help="treat the input as undirected")
    p.add_argument("--dense-limit", type=int, metavar="N",
                   help=f"largest n for dense-path evaluations "
                        f"(default {_dense.DENSE_LIMIT})")
    p.add_argument("--threads", type=int, default=1, metavar="K",
                   help="worker threads for direction scans (default 1)")


def _add_solver_flags(p, t_step=True):
    p.add_argument("--tol", type=float, metavar="TOL",
                   help="stopping tolerance override (estimators default "
                        "1e-4, eigensolver 1e-10)")
    if t_step:
        p.add_argument("--t-step", type=float, default=2e-5, metavar="T",
                       help="finite-difference step (default 2e-5)")
    p.add_argument("--delta", type=float, metavar="D",
                   help="uniform regularization shift (0 disables)")
    p.add_argument("--delta-auto", action="store_true",
                   help="always auto-select the shift, even for strongly "
                        "connected graphs")


def build_parser():
    parser = _Parser(prog="commsens", allow_abbrev=False,
                     description="Communicability sensitivity analysis of "
                                 "weighted directed and undirected networks.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("communicability", help="global communicability "
                       "totals and Perron summary", allow_abbrev=False)
    _add_graph_arg(p)
    _add_solver_flags(p, t_step=False)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_communicability)

    p = sub.add_parser("rank", help="top-k directions by a sensitivity "
                       "criterion", allow_abbrev=False)
    _add_graph_arg(p)
    p.add_argument("--method", choices=RANK_METHODS, default="spr",
                   help="ranking criterion (default spr)")
    p.add_argument("--filter", choices=tuple(FILTERS), default="all",
                   help="candidate directions (default all)")
    p.add_argument("--top", type=int, default=10, metavar="K",
                   help="number of directions to report (default 10)")
    p.add_argument("--change", type=float, nargs="?", const=1.0,
                   metavar="W", help="also report communicabilities after "
                   "changing each reported weight by W (default 1)")
    _add_solver_flags(p)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("sensitivity", help="sensitivity along one direction",
                       allow_abbrev=False)
    _add_graph_arg(p)
    p.add_argument("i", type=int, metavar="I", help="source node (1-based)")
    p.add_argument("j", type=int, metavar="J", help="target node (1-based)")
    p.add_argument("--method", choices=("auto",) + RANK_METHODS,
                   default="auto", help="evaluation method (default auto: "
                   "exact when dense-feasible, else arnoldi-fd)")
    _add_solver_flags(p)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("compare", help="Krylov estimators vs the dense "
                       "oracle", allow_abbrev=False)
    _add_graph_arg(p)
    p.add_argument("--method", choices=("all",) + METHOD_NAMES,
                   default="all", help="restrict to one estimator")
    p.add_argument("--filter", choices=tuple(FILTERS),
                   default="existing-edges",
                   help="candidate directions (default existing-edges)")
    p.add_argument("--tol", type=float, metavar="TOL",
                   help="estimator stopping tolerance (default 1e-4)")
    p.add_argument("--t-step", type=float, default=2e-5, metavar="T",
                   help="finite-difference step (default 2e-5)")
    _add_io_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("validate", help="run the bundled regression suite",
                       allow_abbrev=False)
    p.add_argument("usair", nargs="?", metavar="USAIR97",
                   help="optional path to the USAir97 MatrixMarket file; "
                        "enables the airline-network checks")
    p.add_argument("--tol", type=float, metavar="TOL",
                   help="override every check tolerance")
    p.add_argument("--threads", type=int, default=1, metavar="K")
    _add_io_flags(p)
    p.set_defaults(func=_cmd_validate)
    return parser


# --------------------------------------------------------------------------
# shared helpers

def _load_graph(args):
    with open(args.graph, encoding="utf-8") as fh:
        text = fh.read()
    directed = None
    if args.directed:
        directed = True
    elif args.undirected:
        directed = False
    if args.graph.endswith(".mtx") or text.lstrip().startswith("%%MatrixMarket"):
        return parse_matrix_market(text, directed=directed)
    return parse_edge_list(text, directed=directed if directed is not None
                           else True)


def _resolve_delta(a, args, tol):
    """(delta, operator) honoring --delta / --delta-auto / connectivity."""
    if args.delta is not None:
        if args.delta < 0:
            raise _DataError("--delta must be non-negative")
        if args.delta == 0:
            return 0.0, a
        return float(args.delta), PerturbedOperator(a, args.delta)
    if args.delta_auto or not is_strongly_connected(a):
        return select_delta(a, tol=tol)
    return 0.0, a


def _edge_count(a):
    return a.nnz if a.directed else a.nnz // 2


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_text(payload):
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _num(x):
    """Fixed-width decimal for tables; deterministic."""
    if x is None:
        return "-"
    return f"{x:.10g}"


def _cell(v):
    """Human-readable table cell."""
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _num(v)
    return str(v)


def _csv_cell(v):
    """Machine-readable cell: full-precision floats, lowercase booleans."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _table_text(headers, rows):
    widths = [max(len(h), *(len(r[c]) for r in rows)) if rows else len(h)
              for c, h in enumerate(headers)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(headers), line(["-" * w for w in widths])]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"


def _kv_payload(args, pairs):
    """Render an ordered key/value payload in the requested format."""
    if args.format == "json":
        return _json_text(dict(pairs))
    if args.format == "csv":
        return "key,value\n" + "".join(f"{k},{_csv_cell(v)}\n"
                                       for k, v in pairs)
    return _table_text(["key", "value"], [[k, _cell(v)] for k, v in pairs])


def _record_row(r, index_base=1, exact=None):
    d = r.direction
    return {
        "i": d.i + index_base,
        "j": d.j + index_base,
        "method": r.method,
        "value": r.value,
        "exact": exact,
        "steps": r.steps,
        "matvecs": r.matvecs,
        "converged": r.converged,
    }


# --------------------------------------------------------------------------
# commands

def _cmd_communicability(args):
    a = _load_graph(args)
    limit = args.dense_limit or _dense.DENSE_LIMIT
    tol = args.tol if args.tol is not None else 1e-10
    delta, op = _resolve_delta(a, args, tol)
    triple = perron_triple(op, tol=tol)
    cpn = perron_communicability(triple)
    ctn = (_dense.total_communicability(a, limit) if a.n <= limit else None)
    pairs = [
        ("schema", SCHEMA),
        ("command", "communicability"),
        ("nodes", a.n),
        ("edges", _edge_count(a)),
        ("directed", a.directed),
        ("delta", delta),
        ("ctn", ctn),
        ("rho", triple.rho),
        ("kappa", triple.condition),
        ("cpn", cpn),
        ("cpn_bound", a.n * float(np.expm1(triple.rho))),
        ("kappa_cpn", triple.condition * cpn),
    ]
    if args.format == "table":
        pairs = pairs[2:]  # schema/command are noise for humans
    _emit(args, _kv_payload(args, pairs))
    return 0


def _rank_records(a, args, which, k, limit):
    """(records, delta, base_triple_or_None) for the chosen criterion."""
    method = args.method
    if method == "spr":
        tol = args.tol if args.tol is not None else 1e-10
        delta, op = _resolve_delta(a, args, tol)
        triple = perron_triple(op, tol=tol)
        return top_k_root_sensitivities(triple, k, graph=a, which=which), \
            delta, triple
    if method == "spn":
        tol = args.tol if args.tol is not None else 1e-10
        delta, op = _resolve_delta(a, args, tol)
        triple = perron_triple(op, tol=tol)
        recs = [SensitivityRecord(d, "spn",
                                  perron_sensitivity(op, d, t_step=args.t_step,
                                                     base=triple, tol=tol))
                for d in direction_candidates(a, which)]
        return sort_records(recs)[:k], delta, triple
    if method == "exact":
        scan = _dense.total_sensitivity_scan(
            a, direction_candidates(a, which), dense_limit=limit,
            workers=args.threads)
        return scan.records[:k], None, None
    cfg = EstimatorConfig(method=method,
                          tol=args.tol if args.tol is not None else 1e-4,
                          t_step=args.t_step)
    scan = scan_estimated(a, direction_candidates(a, which), cfg,
                          workers=args.threads)
    if scan.failures:
        d, err = scan.failures[0]
        raise ConvergenceError(
            f"estimator failed on direction ({d.i + 1}, {d.j + 1}): {err}")
    return scan.records[:k], None, None


def _cmd_rank(args):
    a = _load_graph(args)
    if args.top < 0:
        raise _DataError("--top must be >= 0")
    limit = args.dense_limit or _dense.DENSE_LIMIT
    which = FILTERS[args.filter]
    records, delta, triple = _rank_records(a, args, which, args.top, limit)

    rows = [_record_row(r) for r in records]
    if args.change is not None:
        if delta is None:
            delta, op = _resolve_delta(a, args, 1e-10)
            triple = perron_triple(op, tol=1e-10)
        for row, rec in zip(rows, records):
            changed = a.with_edge_change(rec.direction, args.change)
            row["ctn_after"] = (_dense.total_communicability(changed, limit)
                                if a.n <= limit else None)
            shifted = (PerturbedOperator(changed, delta) if delta
                       else changed)
            row["cpn_after"] = perron_communicability(
                perron_triple(shifted, x0=triple.x, y0=triple.y))

    if args.format == "json":
        payload = {
            "schema": SCHEMA, "command": "rank", "method": args.method,
            "filter": args.filter, "k": args.top, "nodes": a.n,
            "edges": _edge_count(a), "directed": a.directed,
            "delta": delta, "change": args.change, "records": rows,
        }
        _emit(args, _json_text(payload))
        return 0
    extra = ["ctn_after", "cpn_after"] if args.change is not None else []
    if args.format == "csv":
        lines = ["i,j,method,approx,exact,steps,matvecs" +
                 ("," + ",".join(extra) if extra else "")]
        for row in rows:
            cells = [str(row["i"]), str(row["j"]), row["method"],
                     repr(row["value"]), "", str(row["steps"]),
                     str(row["matvecs"])]
            cells += ["" if row[c] is None else repr(row[c]) for c in extra]
            lines.append(",".join(cells))
        _emit(args, "\n".join(lines) + "\n")
        return 0
    headers = ["rank", "i", "j", "method", "value"] + extra
    body = []
    for pos, row in enumerate(rows, start=1):
        cells = [str(pos), str(row["i"]), str(row["j"]), row["method"],
                 _num(row["value"])]
        cells += [_num(row[c]) for c in extra]
        body.append(cells)
    text = _table_text(headers, body)
    if delta is not None and delta > 0:
        text += f"(regularization delta = {delta:g})\n"
    _emit(args, text)
    return 0


def _cmd_sensitivity(args):
    a = _load_graph(args)
    i, j = args.i - 1, args.j - 1
    if not (0 <= i < a.n and 0 <= j < a.n):
        raise _DataError(f"node ids must be in 1..{a.n}")
    if i == j:
        raise _DataError("direction must join two distinct nodes")
    if not a.directed and i > j:
        i, j = j, i
    d = Direction(i, j, symmetric=not a.directed)
    limit = args.dense_limit or _dense.DENSE_LIMIT
    method = args.method
    if method == "auto":
        method = "exact" if a.n <= limit else "arnoldi-fd"
    delta = None
    if method == "exact":
        value = _dense.total_sensitivity_exact(a, d, limit)
        rec = SensitivityRecord(d, "exact", value)
    elif method == "spr":
        tol = args.tol if args.tol is not None else 1e-10
        delta, op = _resolve_delta(a, args, tol)
        triple = perron_triple(op, tol=tol)
        rec = SensitivityRecord(d, "spr", perron_root_sensitivity(triple, d))
    elif method == "spn":
        tol = args.tol if args.tol is not None else 1e-10
        delta, op = _resolve_delta(a, args, tol)
        triple = perron_triple(op, tol=tol)
        rec = SensitivityRecord(d, "spn", perron_sensitivity(
            op, d, t_step=args.t_step, base=triple, tol=tol))
    else:
        cfg = EstimatorConfig(method=method,
                              tol=args.tol if args.tol is not None else 1e-4,
                              t_step=args.t_step)
        rec = ESTIMATORS[method](a, d, cfg)
    pairs = [
        ("schema", SCHEMA),
        ("command", "sensitivity"),
        ("i", args.i),
        ("j", args.j),
        ("symmetric", d.symmetric),
        ("method", rec.method),
        ("value", rec.value),
        ("steps", rec.steps),
        ("matvecs", rec.matvecs),
        ("converged", rec.converged),
        ("delta", delta),
    ]
    if args.format == "table":
        pairs = pairs[2:]
    _emit(args, _kv_payload(args, pairs))
    return 0 if rec.converged else 3


def _cmd_compare(args):
    a = _load_graph(args)
    limit = args.dense_limit or _dense.DENSE_LIMIT
    cands = direction_candidates(a, FILTERS[args.filter])
    if not cands:
        raise _DataError("no candidate directions under this filter")
    exact_scan = _dense.total_sensitivity_scan(a, cands, dense_limit=limit,
                                               workers=args.threads)
    exact = {r.direction.pair(): r.value for r in exact_scan.records}
    methods = METHOD_NAMES if args.method == "all" else (args.method,)

    rows, summary = [], []
    for method in methods:
        cfg = EstimatorConfig(method=method,
                              tol=args.tol if args.tol is not None else 1e-4,
                              t_step=args.t_step)
        start = time.perf_counter()
        scan = scan_estimated(a, cands, cfg, workers=args.threads)
        wall = time.perf_counter() - start
        if scan.failures:
            d, err = scan.failures[0]
            raise ConvergenceError(
                f"{method} failed on ({d.i + 1}, {d.j + 1}): {err}")
        recs = sorted(scan.records,
                      key=lambda r: (r.direction.i, r.direction.j))
        err = max(abs(r.value - exact[r.direction.pair()])
                  / max(abs(exact[r.direction.pair()]), 1e-300)
                  for r in recs)
        rows.extend(
            _record_row(r, exact=exact[r.direction.pair()]) for r in recs)
        summary.append({
            "method": method,
            "directions": len(recs),
            "mean_steps": float(np.mean([r.steps for r in recs])),
            "mean_matvecs": float(np.mean([r.matvecs for r in recs])),
            "max_rel_err": float(err),
        })
        print(f"{method}: {wall:.2f}s wall", file=sys.stderr)

    if args.format == "json":
        payload = {
            "schema": SCHEMA, "command": "compare", "filter": args.filter,
            "nodes": a.n, "edges": _edge_count(a), "directed": a.directed,
            "records": rows, "summary": summary,
        }
        _emit(args, _json_text(payload))
        return 0
    if args.format == "csv":
        lines = ["i,j,method,approx,exact,steps,matvecs"]
        lines.extend(
            f"{r['i']},{r['j']},{r['method']},{r['value']!r},"
            f"{r['exact']!r},{r['steps']},{r['matvecs']}" for r in rows)
        _emit(args, "\n".join(lines) + "\n")
        return 0
    body = [[str(r["i"]), str(r["j"]), r["method"], _num(r["value"]),
             _num(r["exact"]), str(r["steps"]), str(r["matvecs"])]
            for r in rows]
    text = _table_text(
        ["i", "j", "method", "approx", "exact", "steps", "matvecs"], body)
    text += "\n" + _table_text(
        ["method", "directions", "mean_steps", "mean_matvecs", "max_rel_err"],
        [[s["method"], str(s["directions"]), f"{s['mean_steps']:.4f}",
          f"{s['mean_matvecs']:.4f}", f"{s['max_rel_err']:.3e}"]
         for s in summary])
    _emit(args, text)
    return 0


def _cmd_validate(args):
    checks = run_validation(tolerance=args.tol, usair_path=args.usair,
                            workers=args.threads)
    ok = all(c.ok for c in checks)
    if args.format == "json":
        payload = {
            "schema": SCHEMA, "command": "validate", "passed": ok,
            "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail}
                       for c in checks],
        }
        _emit(args, _json_text(payload))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "ok", "detail"])
        for c in checks:
            writer.writerow([c.name, str(c.ok).lower(), c.detail])
        _emit(args, buf.getvalue())
    else:
        lines = [f"{'PASS' if c.ok else 'FAIL'}  {c.name}: {c.detail}"
                 for c in checks]
        passed = sum(1 for c in checks if c.ok)
        lines.append(f"{passed} of {len(checks)} checks passed")
        _emit(args, "\n".join(lines) + "\n")
    return 0 if ok else 3


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "delta", None) is not None and args.delta < 0:
            raise _DataError("--delta must be non-negative")
        return args.func(args)
    except GraphFormatError as exc:
        print(f"commsens: data error: {exc}", file=sys.stderr)
        return 2
    except _DataError as exc:
        print(f"commsens: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"commsens: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"commsens: data error: {exc}", file=sys.stderr)
        return 2
    except (PerronError, ConvergenceError, SeriousBreakdownError,
            SizeLimitError) as exc:
        print(f"commsens: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
