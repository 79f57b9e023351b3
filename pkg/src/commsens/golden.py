"""Bundled regression suite with frozen reference values.

Every constant below is a frozen expected result for one of the packaged
example graphs (or for the optional USAir97 airline network, which the user
must supply as a MatrixMarket file). The values were fixed by independent
dense-path computations when the suite was authored; ``run_validation``
recomputes each quantity through the public library code and reports one
pass/fail row per check, so any regression in parsing, the dense kernels,
the Perron solver, or the estimators shows up as an explicit mismatch with
the expected/actual values in the detail string.
"""

from dataclasses import dataclass

import numpy as np

from . import dense as _dense
from .baselines import compare_methods
from .graph import (AdjacencyMatrix, Direction, PerturbedOperator,
                    bundled_graph, direction_candidates)
from .krylov import METHOD_NAMES, EstimatorConfig, scan_estimated
from .perron import (perron_communicability, perron_sensitivity,
                     perron_triple, select_delta, top_k_root_sensitivities)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str

    def __post_init__(self):
        # comparisons produce numpy bools, which json refuses to serialize
        object.__setattr__(self, "ok", bool(self.ok))


# --- four-node weighted demo graph -----------------------------------------
# Root-sensitivity matrix entries, 1-based (i, j) layout, 4-decimal values.
DEMO4_ROOT_SENS = np.array([
    [0.2956, 0.2339, 0.4241, 0.3250],
    [0.2336, 0.1848, 0.3352, 0.2568],
    [0.2109, 0.1669, 0.3026, 0.2319],
    [0.1973, 0.1562, 0.2832, 0.2170],
])
# Off-diagonal pairs ranked by total sensitivity (the Perron-sensitivity
# ranking is identical for this graph), with the sensitivity and the
# communicability realized after increasing that weight by one.
DEMO4_PAIRS = ((1, 3), (2, 3), (1, 4), (4, 3), (2, 4), (1, 2),
               (2, 1), (3, 4), (3, 1), (4, 1), (3, 2), (4, 2))
DEMO4_STN = (22615, 18221, 17662, 15611, 14225, 13151,
             12957, 12883, 11734, 11098, 9585, 9063)
DEMO4_CTN_AFTER = (82269, 76339, 75511, 73124, 71324, 70097,
                   69606, 69588, 68303, 67434, 65627, 65011)
DEMO4_SPN = (22781, 18247, 17577, 15009, 14078, 12411,
             12394, 12134, 10666, 10188, 8562, 8176)
DEMO4_CPN_AFTER = (79872, 73711, 72722, 69720, 68481, 66543,
                   66250, 66022, 64389, 63702, 61789, 61329)

# --- eight-node reducible flow graph ----------------------------------------
FLOW8_DELTA = 1e-5
FLOW8_TOP_ROOT = (((5, 1), 0.477305), ((5, 2), 0.477298), ((5, 8), 0.400601))
FLOW8_STN_ROWS = (((5, 1), 16.8311, 68.1499), ((5, 8), 16.0552, 67.3050),
                  ((5, 2), 14.9415, 65.2404), ((5, 3), 14.1656, 64.4248),
                  ((7, 1), 13.2831, 64.1815))
FLOW8_SPN_ROWS = (((5, 2), 28.5369), ((5, 1), 23.0099), ((5, 3), 19.9219),
                  ((5, 8), 19.5778), ((7, 2), 18.2576))

# --- directed path graph -----------------------------------------------------
PATH8_CTN = 11.03
PATH8_CTN_AFTER = (((8, 1), 13.75), ((1, 3), 12.75))

# --- seven-node hub graph (edge-insertion shoot-out) -------------------------
HUB7_DELTA = 1e-5
HUB7_SELECTIONS = (("etc", (5, 3)), ("egtc", (5, 3)), ("stn", (7, 5)),
                   ("spn", (4, 5)), ("spr", (7, 5)))
HUB7_CTN_AFTER = {(5, 3): 117.3601, (7, 5): 127.1123, (4, 5): 124.1918}
HUB7_CPN_AFTER = {(5, 3): 103.1681, (7, 5): 118.0309, (4, 5): 121.3044}

# --- USAir97 (optional, user-supplied MatrixMarket file) ---------------------
USAIR_N = 332
USAIR_ROOT_ROWS = (((201, 248), 0.0471), ((47, 248), 0.0470),
                   ((47, 201), 0.0464), ((118, 248), 0.0452),
                   ((118, 201), 0.0446))
USAIR_STN_TOP_PAIR = (118, 248)
USAIR_STN_TOP_VALUE = 408.5090
USAIR_MEAN_STEPS = {"arnoldi-block": 9.4774, "arnoldi-fd": 4.9942,
                    "lanczos-block": 10.9233, "lanczos-fd": 4.9941,
                    "kkrs": 6.7381}


def _rel(got, want):
    return abs(got - want) / max(abs(want), 1e-300)


def _value_rows(name, rows, tol, relative=True):
    """rows: iterable of (label, got, want); one CheckResult for the batch."""
    rows = list(rows)
    err = (lambda g, w: _rel(g, w)) if relative else (lambda g, w: abs(g - w))
    kind = "rel" if relative else "abs"
    worst_label, worst_got, worst_want = max(rows, key=lambda r: err(r[1], r[2]))
    worst = err(worst_got, worst_want)
    if worst > tol:
        bad = sum(1 for _, g, w in rows if err(g, w) > tol)
        return CheckResult(name, False,
                           f"{worst_label}: expected {worst_want:.6g}, got "
                           f"{worst_got:.6g} ({kind} err {worst:.2e} > tol "
                           f"{tol:.1e}; {bad}/{len(rows)} rows out)")
    return CheckResult(name, True,
                       f"{len(rows)} values within {kind} {tol:.1e} "
                       f"(worst {worst:.2e})")


def _pair(d):
    """1-based canonical pair of a direction record."""
    return (d.i + 1, d.j + 1)


def check_demo4(tolerance=None, t_step=2e-5):
    a = bundled_graph("demo4")
    out = []

    triple = perron_triple(a)
    got = np.outer(triple.y, triple.x) * triple.condition
    rows = [(f"({i + 1},{j + 1})", got[i, j], DEMO4_ROOT_SENS[i, j])
            for i in range(4) for j in range(4)]
    out.append(_value_rows("demo4 root-sensitivity matrix", rows,
                           tolerance or 1e-4, relative=False))

    dirs = direction_candidates(a, "all")
    scan = _dense.total_sensitivity_scan(a, dirs)
    by_pair = {_pair(r.direction): r for r in scan.records}
    out.append(_value_rows(
        "demo4 total sensitivities",
        [(f"S({i},{j})", by_pair[(i, j)].value, want)
         for (i, j), want in zip(DEMO4_PAIRS, DEMO4_STN)],
        tolerance or 5e-4))
    got_order = tuple(_pair(r.direction) for r in scan.records)
    ok = got_order == DEMO4_PAIRS
    out.append(CheckResult(
        "demo4 total-sensitivity ranking", ok,
        "order matches" if ok else f"expected {DEMO4_PAIRS}, got {got_order}"))

    ctn_rows = []
    for (i, j), want in zip(DEMO4_PAIRS, DEMO4_CTN_AFTER):
        changed = a.with_edge_change(by_pair[(i, j)].direction, 1.0)
        ctn_rows.append((f"C({i},{j})",
                         _dense.total_communicability(changed), want))
    out.append(_value_rows("demo4 communicability after unit increases",
                           ctn_rows, tolerance or 5e-4))

    spn = {(i, j): perron_sensitivity(a, by_pair[(i, j)].direction,
                                      t_step=t_step, base=triple)
           for (i, j) in DEMO4_PAIRS}
    out.append(_value_rows(
        "demo4 perron sensitivities",
        [(f"S({i},{j})", spn[(i, j)], want)
         for (i, j), want in zip(DEMO4_PAIRS, DEMO4_SPN)],
        tolerance or 1e-3))
    spn_order = tuple(sorted(DEMO4_PAIRS, key=lambda p: (-spn[p], p)))
    ok = spn_order == DEMO4_PAIRS
    out.append(CheckResult(
        "demo4 perron-sensitivity ranking", ok,
        "order matches" if ok else f"expected {DEMO4_PAIRS}, got {spn_order}"))

    cpn_rows = []
    for (i, j), want in zip(DEMO4_PAIRS, DEMO4_CPN_AFTER):
        changed = a.with_edge_change(by_pair[(i, j)].direction, 1.0)
        cpn_rows.append((f"C({i},{j})", perron_communicability(
            perron_triple(changed, x0=triple.x, y0=triple.y)), want))
    out.append(_value_rows("demo4 perron communicability after unit increases",
                           cpn_rows, tolerance or 1e-3))
    return out


def check_path8(tolerance=None):
    a = bundled_graph("path8")
    tol = tolerance or 0.01
    rows = [("C", _dense.total_communicability(a), PATH8_CTN)]
    for (i, j), want in PATH8_CTN_AFTER:
        changed = a.with_edge_change(Direction(i - 1, j - 1), 1.0)
        rows.append((f"C+({i},{j})",
                     _dense.total_communicability(changed), want))
    return [_value_rows("path8 communicability before/after insertions",
                        rows, tol, relative=False)]


def check_path_argmax(n_values=range(4, 13)):
    """On a directed n-node path, the (n,1) direction maximizes the total
    sensitivity strictly, for every n in the range."""
    bad = []
    for n in n_values:
        a = AdjacencyMatrix.from_edges(
            n, [(i, i + 1, 1.0) for i in range(n - 1)], directed=True)
        scan = _dense.total_sensitivity_scan(a, direction_candidates(a, "all"))
        top, second = scan.records[0], scan.records[1]
        if (top.direction.i, top.direction.j) != (n - 1, 0):
            bad.append(f"n={n}: argmax {_pair(top.direction)}")
        elif not top.value > second.value:
            bad.append(f"n={n}: argmax not unique")
    ok = not bad
    return [CheckResult("path argmax property (n=4..12)", ok,
                        "unique argmax (n,1) for all n" if ok
                        else "; ".join(bad))]


def check_flow8(tolerance=None, t_step=2e-5):
    a = bundled_graph("flow8")
    out = []

    delta, shifted = select_delta(a)
    ok = np.isclose(delta, FLOW8_DELTA, rtol=1e-12)
    out.append(CheckResult("flow8 delta selection", ok,
                           f"delta={delta:g}" if ok
                           else f"expected {FLOW8_DELTA:g}, got {delta:g}"))
    shifted = PerturbedOperator(a, FLOW8_DELTA)
    triple = perron_triple(shifted)

    top3 = top_k_root_sensitivities(triple, 3)
    pairs = tuple(_pair(r.direction) for r in top3)
    want_pairs = tuple(p for p, _ in FLOW8_TOP_ROOT)
    if pairs != want_pairs:
        out.append(CheckResult("flow8 top root sensitivities", False,
                               f"expected pairs {want_pairs}, got {pairs}"))
    else:
        out.append(_value_rows(
            "flow8 top root sensitivities",
            [(f"S({i},{j})", r.value, want)
             for r, ((i, j), want) in zip(top3, FLOW8_TOP_ROOT)],
            tolerance or 1e-5, relative=False))

    dirs = direction_candidates(a, "all")
    scan = _dense.total_sensitivity_scan(a, dirs)
    got_pairs = tuple(_pair(r.direction) for r in scan.records[:5])
    want_pairs = tuple(p for p, _, _ in FLOW8_STN_ROWS)
    if got_pairs != want_pairs:
        out.append(CheckResult("flow8 total-sensitivity rows", False,
                               f"expected pairs {want_pairs}, got {got_pairs}"))
    else:
        rows = [(f"S({i},{j})", r.value, stn)
                for r, ((i, j), stn, _) in zip(scan.records, FLOW8_STN_ROWS)]
        for r, ((i, j), _, ctn) in zip(scan.records, FLOW8_STN_ROWS):
            changed = a.with_edge_change(r.direction, 1.0)
            rows.append((f"C({i},{j})",
                         _dense.total_communicability(changed), ctn))
        out.append(_value_rows("flow8 total-sensitivity rows", rows,
                               tolerance or 1e-3))

    spn = {}
    for d in dirs:
        spn[_pair(d)] = perron_sensitivity(shifted, d, t_step=t_step,
                                           base=triple)
    got_order = tuple(sorted(spn, key=lambda p: (-spn[p], p))[:5])
    want_pairs = tuple(p for p, _ in FLOW8_SPN_ROWS)
    if got_order != want_pairs:
        out.append(CheckResult("flow8 perron-sensitivity rows", False,
                               f"expected pairs {want_pairs}, got {got_order}"))
    else:
        out.append(_value_rows(
            "flow8 perron-sensitivity rows",
            [(f"S({i},{j})", spn[(i, j)], want)
             for (i, j), want in FLOW8_SPN_ROWS],
            tolerance or 1e-2))
    return out


def check_hub7(tolerance=None):
    a = bundled_graph("hub7")
    out = []
    report = compare_methods(a)
    ok = np.isclose(report["delta"], HUB7_DELTA, rtol=1e-12)
    out.append(CheckResult("hub7 delta selection", ok,
                           f"delta={report['delta']:g}" if ok else
                           f"expected {HUB7_DELTA:g}, got {report['delta']:g}"))

    by_method = {row["method"]: row for row in report["rows"]}
    bad = [f"{m}: expected {want}, got {_pair(by_method[m]['direction'])}"
           for m, want in HUB7_SELECTIONS
           if _pair(by_method[m]["direction"]) != want]
    out.append(CheckResult("hub7 method selections", not bad,
                           "all five methods pick the expected edge"
                           if not bad else "; ".join(bad)))
    if not bad:
        rows = []
        for m, pair in HUB7_SELECTIONS:
            rows.append((f"{m} C^TN", by_method[m]["ctn_after"],
                         HUB7_CTN_AFTER[pair]))
            rows.append((f"{m} C^PN", by_method[m]["cpn_after"],
                         HUB7_CPN_AFTER[pair]))
        out.append(_value_rows("hub7 realized communicabilities", rows,
                               tolerance or 1e-3))
    return out


def check_usair(path, tolerance=None, workers=1):
    from .graph import parse_matrix_market
    with open(path, encoding="utf-8") as fh:
        a = parse_matrix_market(fh.read())
    out = []
    if a.n != USAIR_N:
        return [CheckResult("usair97 fixture", False,
                            f"expected {USAIR_N} nodes, got {a.n}")]

    triple = perron_triple(a)
    top5 = top_k_root_sensitivities(triple, 5, graph=a)
    got_pairs = tuple(_pair(r.direction) for r in top5)
    want_pairs = tuple(tuple(sorted(p)) for p, _ in USAIR_ROOT_ROWS)
    if got_pairs != want_pairs:
        out.append(CheckResult("usair97 top root sensitivities", False,
                               f"expected {want_pairs}, got {got_pairs}"))
    else:
        out.append(_value_rows(
            "usair97 top root sensitivities",
            [(f"S({i},{j})", r.value, want)
             for r, ((i, j), want) in zip(top5, USAIR_ROOT_ROWS)],
            tolerance or 1e-4, relative=False))

    dirs = direction_candidates(a, "existing")
    cfg = EstimatorConfig(method="arnoldi-fd")
    scan = scan_estimated(a, dirs, cfg, workers=workers)
    top = scan.records[0]
    ok = (_pair(top.direction) == USAIR_STN_TOP_PAIR
          and _rel(top.value, USAIR_STN_TOP_VALUE) <= (tolerance or 1e-3))
    out.append(CheckResult(
        "usair97 top total sensitivity", ok,
        f"top {_pair(top.direction)} = {top.value:.4f} "
        f"(expected {USAIR_STN_TOP_PAIR} = {USAIR_STN_TOP_VALUE}; "
        f"next: {[(_pair(r.direction), round(r.value, 2)) for r in scan.records[1:5]]})"))

    rows = []
    for method in METHOD_NAMES:
        m_scan = scan if method == "arnoldi-fd" else scan_estimated(
            a, dirs, EstimatorConfig(method=method), workers=workers)
        mean = float(np.mean([r.steps for r in m_scan.records]))
        rows.append((method, mean, USAIR_MEAN_STEPS[method]))
    out.append(_value_rows("usair97 estimator average steps", rows,
                           tolerance or 0.2))
    return out


def run_validation(tolerance=None, usair_path=None, workers=1):
    """Execute the full suite; returns a list of CheckResult rows."""
    out = []
    suites = (("demo4 suite", lambda: check_demo4(tolerance)),
              ("path8 suite", lambda: check_path8(tolerance)),
              ("path argmax suite", check_path_argmax),
              ("flow8 suite", lambda: check_flow8(tolerance)),
              ("hub7 suite", lambda: check_hub7(tolerance)))
    for name, fn in suites:
        try:
            out.extend(fn())
        except Exception as exc:  # keep running; report the failure honestly
            out.append(CheckResult(name, False,
                                   f"raised {type(exc).__name__}: {exc}"))
    if usair_path is not None:
        try:
            out.extend(check_usair(usair_path, tolerance, workers))
        except FileNotFoundError:
            out.append(CheckResult("usair97 fixture", False,
                                   f"file not found: {usair_path}"))
        except Exception as exc:
            out.append(CheckResult("usair97 suite", False,
                                   f"raised {type(exc).__name__}: {exc}"))
    return out
