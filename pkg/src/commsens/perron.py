"""Perron-root approximations of total communicability and its sensitivity.

For a nonnegative matrix with dominant eigenvalue rho and unit-norm right and
left eigenvectors x and y, the rank-one surrogate of the exponential yields

- the root sensitivity  d(rho)/d(w_ij) = y_i x_j / (y^T x),
- the Perron communicability  (e^rho - 1) * sum(x) * sum(y),

both of which only need one eigentriple instead of a matrix exponential.
The eigentriple itself is computed matrix-free with restarted Arnoldi on the
operator and on its transpose, with warm starts for families of nearby
operators (finite-difference bumps, shifted matrices during delta selection).
"""

import heapq
from dataclasses import dataclass

import numpy as np

from .graph import Direction, EdgeUpdateOperator, PerturbedOperator
from .krylov import _ArnoldiProcess, _CountedOp
from .results import SensitivityRecord, sort_records


class PerronError(RuntimeError):
    """The dominant-eigenpair computation failed or produced invalid output."""


@dataclass(frozen=True)
class PerronTriple:
    """Dominant eigenvalue with unit 2-norm right (x) and left (y) vectors.

    ``residual`` is the larger of the two direct residual norms
    ||A x - rho x|| and ||A^T y - rho y||; ``matvecs`` counts every operator
    application spent, residual checks included.
    """

    rho: float
    x: np.ndarray
    y: np.ndarray
    residual: float
    matvecs: int
    restarts: int
    symmetric: bool = False

    @property
    def condition(self):
        """Eigenvalue condition number 1 / (y^T x) for the unit-norm pair."""
        return 1.0 / float(self.y @ self.x)


def _prep_start(v, n, name):
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != n:
        raise ValueError(f"{name} has size {v.size}, expected {n}")
    nv = np.linalg.norm(v)
    if nv == 0 or not np.isfinite(nv):
        raise ValueError(f"{name} must be a finite nonzero vector")
    return v / nv


def _fix_sign(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _check_nonnegative(v, name):
    vmax = float(v.max())
    if vmax <= 0 or (v < -1e-10 * vmax).any():
        raise PerronError(
            f"{name} eigenvector has entries of both signs; the dominant "
            "eigenpair is not a Perron pair (the operator may be reducible "
            "or have a complex dominant eigenvalue)")


def _ritz_refine(matvec, start, m):
    """One Arnoldi cycle: return the dominant Ritz value and unit Ritz vector."""
    proc = _ArnoldiProcess(matvec, start, m)
    while proc.step():
        pass
    w, u = np.linalg.eig(proc.square_h())
    idx = int(np.argmax(w.real))
    vec = proc.basis() @ u[:, idx]
    real, imag = vec.real, vec.imag
    vec = real if np.linalg.norm(real) >= np.linalg.norm(imag) else imag
    nv = np.linalg.norm(vec)
    if nv == 0:
        raise PerronError("Ritz vector vanished during refinement")
    return float(w[idx].real), _fix_sign(vec / nv)


def perron_triple(op, tol=1e-10, m=None, max_restarts=500, x0=None, y0=None):
    """Compute the dominant eigentriple of a nonnegative operator.

    Restarted Arnoldi (subspace size ``m``, default min(n, 30)) runs on the
    operator and, unless it is symmetric, on its transpose; each restart
    continues from the current Ritz vector. ``x0``/``y0`` warm-start the
    iteration. Convergence requires both direct residuals to fall below
    ``tol * rho``. If the restarts stagnate, a plain power iteration takes
    over before giving up.
    """
    n = op.n
    if m is None:
        m = min(n, 30)
    m = max(1, min(m, n))
    counted = _CountedOp(op)
    sym = bool(getattr(op, "symmetric", False))

    ones = np.full(n, 1.0 / np.sqrt(n))
    x = _prep_start(x0, n, "x0") if x0 is not None else ones.copy()
    if sym:
        y = x
    else:
        y = _prep_start(y0, n, "y0") if y0 is not None else ones.copy()

    def finish(rho, x, y, restarts, residual):
        _check_nonnegative(x, "right")
        if not sym:
            _check_nonnegative(y, "left")
        if not np.isfinite(rho) or rho <= 0:
            raise PerronError(f"dominant eigenvalue {rho!r} is not positive")
        return PerronTriple(rho=float(rho), x=x, y=(x if sym else y),
                            residual=float(residual), matvecs=counted.count,
                            restarts=restarts, symmetric=sym)

    best = np.inf
    stalled = 0
    rho = 0.0
    restarts = 0
    for restart in range(1, max_restarts + 1):
        restarts = restart
        rho_r, x = _ritz_refine(counted.matvec, x, m)
        if sym:
            rho, y = rho_r, x
            res = np.linalg.norm(counted.matvec(x) - rho * x)
        else:
            rho_l, y = _ritz_refine(counted.rmatvec, y, m)
            rho = 0.5 * (rho_r + rho_l)
            res = max(np.linalg.norm(counted.matvec(x) - rho * x),
                      np.linalg.norm(counted.rmatvec(y) - rho * y))
        if not np.isfinite(rho) or rho <= 0:
            raise PerronError(f"dominant eigenvalue estimate {rho!r} is not positive")
        if res <= tol * rho:
            return finish(rho, x, y, restarts, res)
        if res >= 0.5 * best:
            stalled += 1
            if stalled >= 3:
                break  # hand over to the power fallback
        else:
            stalled = 0
        best = min(best, res)

    def _renormalize(v, name):
        nv = np.linalg.norm(v)
        if nv == 0 or not np.isfinite(nv):
            raise PerronError(
                f"the {name} iterate collapsed to zero; the operator has no "
                "positive dominant eigenpair (it may be nilpotent)")
        return _fix_sign(v / nv)

    # power-iteration fallback for stagnating restarts
    for _ in range(2000):
        for _ in range(10):
            x = _renormalize(counted.matvec(x), "right")
            if not sym:
                y = _renormalize(counted.rmatvec(y), "left")
        restarts += 1
        ax = counted.matvec(x)
        rho_r = float(x @ ax)
        res = np.linalg.norm(ax - rho_r * x)
        if sym:
            rho, y = rho_r, x
        else:
            aty = counted.rmatvec(y)
            rho_l = float(y @ aty)
            res = max(res, np.linalg.norm(aty - rho_l * y))
            rho = 0.5 * (rho_r + rho_l)
        if rho > 0 and res <= tol * rho:
            return finish(rho, x, y, restarts, res)
    raise PerronError(
        f"dominant eigenpair did not reach tol={tol:g} within the iteration "
        f"budget (best residual {best:.3e})")


def perron_root_sensitivity(triple, d):
    """Derivative of the dominant eigenvalue along an edge-weight direction.

    A one-sided direction contributes y_i x_j / (y^T x); a symmetric
    direction bumps both orientations, so both contributions add.
    """
    base = float(triple.y @ triple.x)
    if base <= 0:
        raise PerronError("left/right eigenvector inner product is not positive")
    val = triple.y[d.i] * triple.x[d.j]
    if d.symmetric:
        val += triple.y[d.j] * triple.x[d.i]
    return float(val / base)


def top_k_root_sensitivities(triple, k, graph=None, which="all"):
    """Largest k root sensitivities without forming the n x n outer product.

    The bilinear values y_i x_j are enumerated best-first from the two sorted
    factor vectors with a heap over the sorted-rank grid, so only O(k) cells
    are visited for unrestricted queries. ``which`` restricts the candidate
    pairs to existing edges, absent pairs, or all off-diagonal pairs (the
    latter two need ``graph`` only when filtering). For an undirected graph
    (or a symmetric operator) mirror pairs carry the same value and are
    reported once, as the one-sided value on the canonical i < j direction.

    Returns SensitivityRecords (method tag "spr") sorted by (-value, i, j).
    """
    if which not in ("existing", "absent", "all"):
        raise ValueError(f"unknown candidate filter {which!r}")
    if which != "all" and graph is None:
        raise ValueError(f"which={which!r} requires the graph")
    collapse = graph.symmetric if graph is not None else triple.symmetric
    denom = float(triple.y @ triple.x)
    if denom <= 0:
        raise PerronError("left/right eigenvector inner product is not positive")
    x, y = triple.x, triple.y
    n = x.size

    def record(i, j, value):
        d = Direction(i, j, symmetric=collapse)
        return SensitivityRecord(direction=d, method="spr", value=value)

    out = []
    if which == "existing":
        rows, cols, _ = graph.entry_arrays()
        vals = y[rows] * x[cols] / denom
        if collapse:
            keep = rows < cols
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        order = np.lexsort((cols, rows, -vals))[:k]
        return [record(int(rows[t]), int(cols[t]), float(vals[t]))
                for t in order]

    if k <= 0 or n < 2:
        return out
    by_y = np.lexsort((np.arange(n), -y))
    by_x = np.lexsort((np.arange(n), -x))
    heap = [(-float(y[by_y[0]] * x[by_x[0]]), 0, 0)]
    seen = {(0, 0)}
    taken = set()
    while heap and len(out) < k:
        _, a, b = heapq.heappop(heap)
        for na, nb in ((a + 1, b), (a, b + 1)):
            if na < n and nb < n and (na, nb) not in seen:
                seen.add((na, nb))
                heapq.heappush(
                    heap, (-float(y[by_y[na]] * x[by_x[nb]]), na, nb))
        i, j = int(by_y[a]), int(by_x[b])
        if i == j:
            continue
        if which == "absent" and graph.has_edge(i, j):
            continue
        if collapse:
            pair = (min(i, j), max(i, j))
            if pair in taken:
                continue
            taken.add(pair)
            i, j = pair
        out.append(record(i, j, float(y[i] * x[j] / denom)))
    return sort_records(out)


def perron_communicability(triple, log=False):
    """Rank-one network communicability (e^rho - 1) * sum(x) * sum(y).

    ``log=True`` returns the natural log of the value, computed without
    forming e^rho, for spectral radii beyond double-precision range.
    """
    sx = float(np.sum(triple.x))
    sy = float(np.sum(triple.y))
    if sx <= 0 or sy <= 0:
        raise PerronError("Perron vector sums must be positive")
    if log:
        return float(triple.rho + np.log1p(-np.exp(-triple.rho))
                     + np.log(sx) + np.log(sy))
    with np.errstate(over="ignore"):  # detected below, reported as an error
        value = float(np.expm1(triple.rho) * sx * sy)
    if not np.isfinite(value):
        raise PerronError(
            f"exp({triple.rho:.6g}) overflows double precision; "
            "pass log=True for the log-scale value")
    return value


def perron_sensitivity(op, d, t_step=2e-5, base=None, tol=1e-10):
    """Forward difference of the Perron communicability along a direction.

    ``base`` supplies a precomputed eigentriple of ``op`` (it is computed on
    the fly otherwise) and warm-starts the perturbed solve.
    """
    if base is None:
        base = perron_triple(op, tol=tol)
    bumped = perron_triple(EdgeUpdateOperator(op, d, t_step), tol=tol,
                           x0=base.x, y0=base.y)
    return float(
        (perron_communicability(bumped) - perron_communicability(base)) / t_step)


def kappa_relation_report(a, dense_limit=None):
    """Dense spectral split of total communicability into Perron and tail.

    Diagonalizing the matrix as X diag(lambda) X^{-1} expands the total
    communicability into per-eigenvalue terms (e^lambda - 1) (1^T X)_j
    (X^{-1} 1)_j; the Perron term equals kappa times the Perron
    communicability, with kappa = 1/(y^T x) the eigenvalue condition number.
    Returns a dict whose core keys are ``ctn`` (the total), ``kappa_cpn``
    (the Perron term) and ``gap`` (the dominance ratio |lambda_2| / rho,
    which tells how trustworthy the rank-one approximation is), plus
    supporting diagnostics: kappa, the rank-one communicability, the tail,
    and the full spectral sum (which must reproduce the total).
    """
    from . import dense as _dense

    arr = _dense._as_dense(a, dense_limit or _dense.DENSE_LIMIT)
    n = arr.shape[0]
    ones = np.ones(n)
    w, xmat = np.linalg.eig(arr)
    try:
        # row j is the dual left eigenvector of column j
        dual = np.linalg.inv(xmat)
    except np.linalg.LinAlgError:
        raise PerronError(
            "the adjacency matrix is not diagonalizable; the per-eigenvalue "
            "split of the total communicability does not exist") from None
    terms = (np.exp(w) - 1.0) * (xmat.T @ ones) * (dual @ ones)
    p = int(np.argmax(w.real))
    rho = float(w[p].real)
    if rho <= 0:
        raise PerronError(f"dominant eigenvalue {rho!r} is not positive")
    others = np.abs(np.delete(w, p))
    xp = _fix_sign(xmat[:, p].real)
    xp = xp / np.linalg.norm(xp)
    yp = _fix_sign(dual[p].real)
    yp = yp / np.linalg.norm(yp)
    kappa = 1.0 / float(yp @ xp)
    spectral_sum = float(terms.sum().real)
    kappa_cpn = float(terms[p].real)
    return {
        "ctn": float(_dense.total_communicability(arr)),
        "kappa_cpn": kappa_cpn,
        "gap": float(others.max() / rho) if others.size else 0.0,
        "rho": rho,
        "kappa": kappa,
        "cpn": float(np.expm1(rho) * xp.sum() * yp.sum()),
        "tail": spectral_sum - kappa_cpn,
        "spectral_sum": spectral_sum,
    }


def _top_root_pair(op, warm, tol):
    x0, y0 = warm if warm is not None else (None, None)
    triple = perron_triple(op, tol=tol, x0=x0, y0=y0)
    ranked = top_k_root_sensitivities(triple, 1, which="all")
    if not ranked:
        raise PerronError("no candidate directions to rank")
    return ranked[0].direction, (triple.x, triple.y)


def select_delta(a, objective=None, delta0=1e-4, factor=10.0,
                 max_reductions=8, tol=1e-10):
    """Choose the uniform shift delta that regularizes a reducible graph.

    The graph is shifted to A + delta * ones * ones^T (applied implicitly)
    and ``objective`` maps the shifted operator to a comparable selection --
    by default the top direction ranked by root sensitivity over all pairs.
    Starting from ``delta0``, delta shrinks by ``factor`` until two
    consecutive shifts select the same object; the smaller shift of that
    first stable pair is returned together with its shifted operator.
    Successive solves warm-start from the previous eigenvectors.
    """
    if objective is None:
        def objective(op, warm):
            return _top_root_pair(op, warm, tol)
    if not (delta0 > 0 and factor > 1):
        raise ValueError("delta0 must be positive and factor must exceed 1")
    warm = None
    previous = None
    for step in range(max_reductions + 1):
        delta = delta0 / factor ** step
        op = PerturbedOperator(a, delta)
        top, warm = objective(op, warm)
        if previous is not None and top == previous:
            return delta, op
        previous = top
    raise PerronError(
        f"selection did not stabilize within {max_reductions} reductions of "
        f"the shift (last delta {delta:g})")
