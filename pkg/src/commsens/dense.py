"""Dense matrix-function path: communicability and its exact edge derivatives.

Everything here materializes n-by-n (or 2n-by-2n) arrays and is guarded by a
size limit; the Krylov estimators cover graphs beyond it.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from .graph import AdjacencyMatrix, Direction, PerturbedOperator
from .results import ScanResult, SensitivityRecord, sort_records

DENSE_LIMIT = 3000


class SizeLimitError(ValueError):
    """The dense path was refused because the graph exceeds the size limit."""


def _as_dense(a, dense_limit=DENSE_LIMIT):
    if isinstance(a, (AdjacencyMatrix, PerturbedOperator)):
        if a.n > dense_limit:
            raise SizeLimitError(
                f"dense path refused: n={a.n} exceeds limit {dense_limit}")
        return a.to_dense()
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square matrix")
    if arr.shape[0] > dense_limit:
        raise SizeLimitError(
            f"dense path refused: n={arr.shape[0]} exceeds limit {dense_limit}")
    return arr


def expm(a, dense_limit=DENSE_LIMIT):
    """Matrix exponential (scaling and squaring with Padé approximation)."""
    return scipy.linalg.expm(_as_dense(a, dense_limit))


def exp0(a, dense_limit=DENSE_LIMIT):
    """exp(A) - I: the exponential with the identity (empty-walk) term removed."""
    out = expm(a, dense_limit)
    np.fill_diagonal(out, out.diagonal() - 1.0)
    return out


def total_communicability(a, dense_limit=DENSE_LIMIT):
    """Sum of exp0(A) over all node pairs: 1^T (exp(A) - I) 1."""
    arr = _as_dense(a, dense_limit)
    return float(scipy.linalg.expm(arr).sum()) - arr.shape[0]


def direction_matrix(n, d):
    """Dense unit perturbation matrix for a direction."""
    out = np.zeros((n, n))
    out[d.i, d.j] = 1.0
    if d.symmetric:
        out[d.j, d.i] = 1.0
    return out


def frechet_block(a, d, dense_limit=DENSE_LIMIT):
    """Derivative of exp0 at A along direction d, via one doubled exponential.

    The off-diagonal block of exp([[A, E], [0, A]]) is the directional
    derivative; the identity shift of exp0 vanishes there, so the block can
    be read off the plain exponential.
    """
    arr = _as_dense(a, dense_limit)
    n = arr.shape[0]
    if d.i >= n or d.j >= n:
        raise ValueError("direction out of range")
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = arr
    block[n:, n:] = arr
    block[:n, n:] = direction_matrix(n, d)
    return scipy.linalg.expm(block)[:n, n:]


def total_sensitivity_exact(a, d, dense_limit=DENSE_LIMIT):
    """Derivative of total communicability w.r.t. the weight along d."""
    return float(frechet_block(a, d, dense_limit).sum())


def total_sensitivity_scan(a, candidates, dense_limit=DENSE_LIMIT, workers=1):
    """Exact sensitivity for every candidate direction.

    Records are ranked (descending value, ties by index pair) and the
    aggregate sum over all candidates is reported alongside.
    """
    arr = _as_dense(a, dense_limit)

    def one(d):
        return SensitivityRecord(direction=d, method="exact",
                                 value=total_sensitivity_exact(arr, d, dense_limit))

    candidates = list(candidates)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, candidates))
    else:
        records = [one(d) for d in candidates]
    records = sort_records(records)
    return ScanResult(records=records, failures=[],
                      aggregate=float(sum(r.value for r in records)))
