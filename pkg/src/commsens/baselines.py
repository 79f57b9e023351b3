"""Edge-selection heuristics and a harness comparing them to sensitivities.

The two classical scores rank a candidate edge (i, j) by products of
per-node communicabilities:

- ``edge_tc``: hub(i) * authority(j), with hub = exp(A) 1 (row sums of the
  full exponential) and authority = exp(A)^T 1;
- ``edge_gtc``: the same product built from the odd part of the singular
  value decomposition, U sinh(S) V^T 1 and V sinh(S) U^T 1, which weighs
  alternating walks instead of ordinary ones.

``compare_methods`` pits them against the derivative-based rankings (exact
total-sensitivity, Perron-root sensitivity, and the finite difference of the
Perron communicability) and reports the communicability actually realized
after committing each method's chosen edge change. All of this is
dense-path-only; it exists for comparison tables on small graphs.
"""

import numpy as np

from . import dense as _dense
from .graph import PerturbedOperator, direction_candidates
from .perron import (perron_communicability, perron_root_sensitivity,
                     perron_sensitivity, perron_triple, select_delta)


def svd_factors(a, dense_limit=None):
    """Deterministic singular value decomposition (U, sigma, V^T).

    Signs are normalized so each left singular vector's first
    non-negligible entry is positive (the matching right vector is flipped
    along with it, preserving the product).
    """
    arr = _dense._as_dense(a, dense_limit or _dense.DENSE_LIMIT)
    u, sigma, vt = np.linalg.svd(arr)
    for k in range(sigma.size):
        col = u[:, k]
        big = np.abs(col) > 1e-12 * max(1.0, np.abs(col).max())
        if big.any() and col[np.argmax(big)] < 0:
            u[:, k] = -col
            vt[k] = -vt[k]
    return u, sigma, vt


def hub_authority_scores(a, dense_limit=None):
    """Row and column sums of the matrix exponential: (exp(A) 1, exp(A)^T 1)."""
    e = _dense.expm(a, dense_limit or _dense.DENSE_LIMIT)
    ones = np.ones(e.shape[0])
    return e @ ones, e.T @ ones


def odd_hub_authority_scores(a, dense_limit=None):
    """Hub/authority totals of the odd exponential part sinh, via the SVD.

    With A = U S V^T these are U sinh(S) V^T 1 and V sinh(S) U^T 1. For a
    symmetric matrix the two vectors coincide componentwise.
    """
    u, sigma, vt = svd_factors(a, dense_limit)
    ones = np.ones(u.shape[0])
    hub = u @ (np.sinh(sigma) * (vt @ ones))
    authority = vt.T @ (np.sinh(sigma) * (u.T @ ones))
    return hub, authority


def edge_tc(a, d, dense_limit=None):
    """Edge score hub(i) * authority(j) from the matrix exponential.

    For scoring many directions at once, compute
    :func:`hub_authority_scores` once and take the products directly.
    """
    hub, authority = hub_authority_scores(a, dense_limit)
    return float(hub[d.i] * authority[d.j])


def edge_gtc(a, d, dense_limit=None):
    """Edge score from the sinh-based (odd-part) hub/authority product."""
    hub, authority = odd_hub_authority_scores(a, dense_limit)
    return float(hub[d.i] * authority[d.j])


def _best(scored):
    return min(scored, key=lambda item: (-item[1], item[0].i, item[0].j))


COMPARE_METHODS = ("etc", "egtc", "stn", "spn", "spr")


def compare_methods(a, candidates=None, delta=None, change=1.0,
                    t_step=2e-5, dense_limit=None, tol=1e-10):
    """Let each selection rule pick its best direction and audit the outcome.

    ``candidates`` defaults to the absent (zero-weight) pairs, i.e. the
    edge-insertion setting; pass existing edges with a negative ``change``
    for removal analysis. ``delta`` regularizes the Perron-based rules on
    graphs that are not strongly connected: None picks it automatically by
    shrinking until the top-ranked direction stabilizes, 0 uses the graph
    as-is, and a positive value is used verbatim. Every method's winner is
    then committed as a weight change of ``change`` and the realized totals
    are recorded: ``ctn_after`` on the changed graph and ``cpn_after`` on
    its shifted counterpart (same delta), so the Perron column reflects the
    operator that rule actually ranks.

    Returns {"delta": float, "rows": [...]} where each row carries the
    method tag, the chosen direction, its score under that method, and the
    two realized totals.
    """
    limit = dense_limit or _dense.DENSE_LIMIT
    if candidates is None:
        candidates = direction_candidates(a, "absent")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate directions to compare")

    if delta is None:
        delta, shifted = select_delta(a, tol=tol)
    elif delta == 0:
        delta, shifted = 0.0, a
    else:
        shifted = PerturbedOperator(a, delta)
    base_triple = perron_triple(shifted, tol=tol)

    hub, authority = hub_authority_scores(a, limit)
    odd_hub, odd_authority = odd_hub_authority_scores(a, limit)
    picks = {
        "etc": _best([(d, float(hub[d.i] * authority[d.j]))
                      for d in candidates]),
        "egtc": _best([(d, float(odd_hub[d.i] * odd_authority[d.j]))
                       for d in candidates]),
        "spn": _best([(d, perron_sensitivity(shifted, d, t_step=t_step,
                                             base=base_triple, tol=tol))
                      for d in candidates]),
        "spr": _best([(d, perron_root_sensitivity(base_triple, d))
                      for d in candidates]),
    }
    stn = _dense.total_sensitivity_scan(a, candidates, dense_limit=limit)
    picks["stn"] = (stn.records[0].direction, stn.records[0].value)

    rows = []
    for method in COMPARE_METHODS:
        d, score = picks[method]
        changed = a.with_edge_change(d, change)
        ctn_after = _dense.total_communicability(changed, limit)
        shifted_after = PerturbedOperator(changed, delta) if delta else changed
        cpn_after = perron_communicability(
            perron_triple(shifted_after, tol=tol,
                          x0=base_triple.x, y0=base_triple.y))
        rows.append({
            "method": method,
            "direction": d,
            "score": float(score),
            "ctn_after": float(ctn_after),
            "cpn_after": float(cpn_after),
        })
    return {"delta": float(delta), "rows": rows}
