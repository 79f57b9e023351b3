"""Krylov-subspace estimators for total-communicability edge sensitivities.

Five estimators approximate the derivative of the total communicability
along a single-edge perturbation direction without densifying the graph:

- ``arnoldi-block``: Arnoldi on the doubled operator [[A, E], [0, A]];
- ``arnoldi-fd``: forward difference of two plain Arnoldi runs (A and A+tE);
- ``lanczos-block``: two-sided Lanczos on the doubled operator;
- ``lanczos-fd``: forward difference of two two-sided Lanczos runs;
- ``kkrs``: a low-rank Fréchet-derivative projection coupling Krylov spaces
  of A (from e_i) and of A^T (from e_j).

All of them grow the subspace one column at a time, evaluate the projected
problem with a dense exponential at every step, and stop once the sequence
of estimates has settled to a relative tolerance (see ``_drive`` for the
exact rule, which guards against coincidental one-off agreements).
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graph import EdgeUpdateOperator
from .results import ScanResult, SensitivityRecord, sort_records

MACHINE_EPS = float(np.finfo(np.float64).eps)
LUCKY_BREAKDOWN_RTOL = 1e-14
SERIOUS_BREAKDOWN_RTOL = 1e-12

METHOD_NAMES = ("arnoldi-block", "arnoldi-fd", "lanczos-block", "lanczos-fd", "kkrs")


class ConvergenceError(RuntimeError):
    """An iteration failed to reach its tolerance within the step budget."""


class SeriousBreakdownError(RuntimeError):
    """Two-sided Lanczos hit w^T v ~ 0 with non-negligible residuals."""

    def __init__(self, step):
        super().__init__(f"serious biorthogonal breakdown at step {step}")
        self.step = step


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs shared by the five estimators.

    ``t_step`` only affects the finite-difference methods, ``eta`` scales the
    KKRS direction (the estimate is linear in it), and ``scale`` divides the
    doubled operator inside ``lanczos-block`` to damp a stagnating stopping
    sequence; the reported value is always mapped back to the unscaled
    problem. The other methods ignore the knobs that do not apply to them.
    """

    method: str = "arnoldi-fd"
    tol: float = 1e-4
    t_step: float = 2e-5
    m_max: int = 200
    eta: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.method!r}; expected one of "
                             f"{', '.join(METHOD_NAMES)}")
        if not (self.tol > 0 and self.t_step > 0 and self.scale > 0):
            raise ValueError("tol, t_step and scale must be positive")
        if self.m_max < 2:
            raise ValueError("m_max must be at least 2")
        if self.eta == 0:
            raise ValueError("eta must be nonzero")


@dataclass(frozen=True)
class ArnoldiDecomposition:
    """op V = V h + residual e_m^T with orthonormal V and Hessenberg h."""

    v_basis: np.ndarray
    h: np.ndarray
    residual: np.ndarray
    m: int
    breakdown: bool = False


@dataclass(frozen=True)
class BiorthDecomposition:
    """Two-sided Lanczos factorization.

    op V = V t + residual_v e_m^T, op^T W = W t^T + residual_w e_m^T,
    with W^T V = I and tridiagonal t.
    """

    v_basis: np.ndarray
    w_basis: np.ndarray
    t: np.ndarray
    residual_v: np.ndarray
    residual_w: np.ndarray
    m: int
    breakdown: bool = False


def _matvec_of(op):
    return op.matvec if hasattr(op, "matvec") else op


class _ArnoldiProcess:
    """Incremental Arnoldi with optional second orthogonalization pass."""

    def __init__(self, matvec, v1, m_max, reorth=True):
        v1 = np.asarray(v1, dtype=np.float64)
        nv = np.linalg.norm(v1)
        if nv == 0:
            raise ValueError("start vector must be nonzero")
        self.matvec = matvec
        self.reorth = reorth
        self.m_max = m_max
        self.v = np.empty((v1.size, m_max + 1))
        self.v[:, 0] = v1 / nv
        self.h = np.zeros((m_max + 1, m_max))
        self.m = 0
        self.exhausted = False
        self.residual = np.zeros(v1.size)

    def step(self):
        """Add one column. Returns False if exhausted or out of budget."""
        if self.exhausted or self.m >= self.m_max:
            return False
        k = self.m
        w = np.asarray(self.matvec(self.v[:, k]), dtype=np.float64)
        coeffs = self.v[:, :k + 1].T @ w
        w = w - self.v[:, :k + 1] @ coeffs
        if self.reorth:
            fixup = self.v[:, :k + 1].T @ w
            w = w - self.v[:, :k + 1] @ fixup
            coeffs = coeffs + fixup
        self.h[:k + 1, k] = coeffs
        self.m = k + 1
        hn = np.linalg.norm(w)
        self.residual = w
        scale = max(1.0, np.linalg.norm(self.h[:self.m, :self.m]))
        if hn <= LUCKY_BREAKDOWN_RTOL * scale:
            self.h[k + 1, k] = 0.0
            self.exhausted = True
        else:
            self.h[k + 1, k] = hn
            self.v[:, k + 1] = w / hn
        return True

    def basis(self):
        return self.v[:, :self.m]

    def square_h(self):
        return self.h[:self.m, :self.m]


class _BiorthProcess:
    """Incremental two-sided Lanczos with optional rebiorthogonalization."""

    def __init__(self, matvec, rmatvec, v1, w1, m_max, rebiorth=True):
        v1 = np.asarray(v1, dtype=np.float64)
        w1 = np.asarray(w1, dtype=np.float64)
        nv = np.linalg.norm(v1)
        if nv == 0 or np.linalg.norm(w1) == 0:
            raise ValueError("start vectors must be nonzero")
        v1 = v1 / nv
        dual = float(w1 @ v1)
        if abs(dual) < 1e-14 * np.linalg.norm(w1):
            raise ValueError("start vectors must not be (nearly) orthogonal")
        self.matvec = matvec
        self.rmatvec = rmatvec
        self.rebiorth = rebiorth
        self.m_max = m_max
        n = v1.size
        self.v = np.empty((n, m_max + 1))
        self.w = np.empty((n, m_max + 1))
        self.v[:, 0] = v1
        self.w[:, 0] = w1 / dual      # so that w_1^T v_1 = 1
        self.t = np.zeros((m_max + 1, m_max + 1))
        self.m = 0
        self.exhausted = False
        # Which residual vanished at exhaustion. A vanished v-residual means
        # the right space is invariant, so V-side projections are exact; a
        # vanished w-residual alone only certifies W-side functionals.
        self.lucky_v = False
        self.lucky_w = False
        self.residual_v = np.zeros(n)
        self.residual_w = np.zeros(n)

    def step(self):
        if self.exhausted or self.m >= self.m_max:
            return False
        k = self.m
        vk, wk = self.v[:, k], self.w[:, k]
        # A chain of near-singular dual products can inflate the columns
        # until the recurrence overflows; the finiteness check below turns
        # that into a breakdown, so the arithmetic may stay quiet about it.
        with np.errstate(over="ignore", invalid="ignore"):
            av = np.asarray(self.matvec(vk), dtype=np.float64)
            atw = np.asarray(self.rmatvec(wk), dtype=np.float64)
            alpha = float(wk @ av)
            vh = av - alpha * vk
            wh = atw - alpha * wk
            if k > 0:
                vh -= self.t[k - 1, k] * self.v[:, k - 1]
                wh -= self.t[k, k - 1] * self.w[:, k - 1]
            if self.rebiorth:
                # oblique cleanup against the dual basis keeps W^T V = I
                vh -= self.v[:, :k + 1] @ (self.w[:, :k + 1].T @ vh)
                wh -= self.w[:, :k + 1] @ (self.v[:, :k + 1].T @ wh)
            self.t[k, k] = alpha
            self.m = k + 1
            self.residual_v = vh
            self.residual_w = wh
            nv, nw = np.linalg.norm(vh), np.linalg.norm(wh)
        if not (np.isfinite(nv) and np.isfinite(nw) and np.isfinite(alpha)):
            # the recurrence destroyed itself (overflow through a chain of
            # near-singular dual products); same remedy as a clean breakdown
            raise SeriousBreakdownError(self.m)
        scale = max(1.0, np.linalg.norm(self.t[:self.m, :self.m]))
        if nv <= LUCKY_BREAKDOWN_RTOL * scale or nw <= LUCKY_BREAKDOWN_RTOL * scale:
            self.lucky_v = nv <= LUCKY_BREAKDOWN_RTOL * scale
            self.lucky_w = nw <= LUCKY_BREAKDOWN_RTOL * scale
            self.exhausted = True
            return True
        dual = float(wh @ vh)
        if abs(dual) < SERIOUS_BREAKDOWN_RTOL * nv * nw:
            raise SeriousBreakdownError(self.m)
        delta = np.sqrt(abs(dual))
        beta = dual / delta
        self.t[k + 1, k] = delta
        self.t[k, k + 1] = beta
        self.v[:, k + 1] = vh / delta
        self.w[:, k + 1] = wh / beta
        return True

    def v_basis(self):
        return self.v[:, :self.m]

    def w_mat(self):
        return self.w[:, :self.m]

    def square_t(self):
        return self.t[:self.m, :self.m]


def arnoldi(op, v1, m, reorth=True):
    """Run m Arnoldi steps of ``op`` from ``v1``.

    ``op`` may be an operator object or a bare matvec callable. Stops early
    on an invariant subspace, returning a smaller decomposition with the
    breakdown flag set.
    """
    proc = _ArnoldiProcess(_matvec_of(op), v1, m, reorth=reorth)
    while proc.step():
        pass
    return ArnoldiDecomposition(
        v_basis=proc.basis().copy(), h=proc.square_h().copy(),
        residual=proc.residual.copy(), m=proc.m, breakdown=proc.exhausted)


def lanczos_biorth(op, op_transpose, v1, w1, m, rebiorth=True):
    """Run m two-sided Lanczos steps; raises SeriousBreakdownError on w^T v ~ 0."""
    proc = _BiorthProcess(_matvec_of(op), _matvec_of(op_transpose), v1, w1, m,
                          rebiorth=rebiorth)
    while proc.step():
        pass
    return BiorthDecomposition(
        v_basis=proc.v_basis().copy(), w_basis=proc.w_mat().copy(),
        t=proc.square_t().copy(), residual_v=proc.residual_v.copy(),
        residual_w=proc.residual_w.copy(), m=proc.m, breakdown=proc.exhausted)


# -- operator plumbing ---------------------------------------------------------


class _CountedOp:
    """Pass-through operator that counts base matvec applications."""

    def __init__(self, op):
        self.op = op
        self.count = 0

    @property
    def n(self):
        return self.op.n

    @property
    def symmetric(self):
        return getattr(self.op, "symmetric", False)

    def matvec(self, v):
        self.count += 1
        return self.op.matvec(v)

    def rmatvec(self, v):
        self.count += 1
        return self.op.rmatvec(v)


class _BlockFrechetOp:
    """[[A, E], [0, A]] on stacked vectors; one apply costs two base matvecs."""

    def __init__(self, op, d, scale=1.0):
        self.op = op
        self.d = d
        self.scale = float(scale)

    @property
    def n(self):
        return 2 * self.op.n

    def matvec(self, u):
        n = self.op.n
        d = self.d
        top = self.op.matvec(u[:n])
        top[d.i] += u[n + d.j]
        if d.symmetric:
            top[d.j] += u[n + d.i]
        out = np.concatenate([top, self.op.matvec(u[n:])])
        if self.scale != 1.0:
            out /= self.scale
        return out

    def rmatvec(self, u):
        n = self.op.n
        d = self.d
        bot = self.op.rmatvec(u[n:])
        bot[d.j] += u[d.i]
        if d.symmetric:
            bot[d.i] += u[d.j]
        out = np.concatenate([self.op.rmatvec(u[:n]), bot])
        if self.scale != 1.0:
            out /= self.scale
        return out


def _exp0_small(h):
    # A near-breakdown two-sided recurrence can hand us a projected matrix
    # with huge entries; expm then overflows to inf/nan, which the callers
    # detect and turn into a fallback. Keep that probe quiet.
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(h)
    np.fill_diagonal(out, out.diagonal() - 1.0)
    return out


def _drive(processes, value_fn, cfg):
    """Grow all processes in lockstep until the estimate settles.

    The stopping sequence is the relative change r_m between consecutive
    estimates. A single sub-tolerance change is not trusted on its own:
    estimate sequences produced by difference quotients and coupled
    two-sided recurrences stall and then rebound, so one coincidental
    agreement can occur while the estimate is still far from its limit.
    Iteration therefore ends only when all of the following hold:

    - the last two changes are below the tolerance (a rebound after a lone
      dip shows up as a large second change and keeps the loop alive),
    - the change before those is below sqrt(tolerance), i.e. the sequence
      had already entered its settling phase rather than jumping straight
      from a large move into a dip, and
    - the geometric-tail estimate of the remaining error, r_m * q / (1 - q),
      is below the tolerance, with the contraction rate q taken as the
      median of the last three ratios of consecutive r values (the median
      keeps a lone dip from faking a tiny rate).

    Near-zero previous estimates switch the test to an absolute difference.
    When every process has found an invariant subspace iteration stops too.

    Returns (value, steps, converged, reason) with reason one of "rule" (the
    relative-change test fired), "exhausted" (all processes hit invariant
    subspaces first), or "budget" (step limit reached).
    """

    def ratio(prev_r, cur_r):
        if prev_r == 0.0:
            return np.inf if cur_r > 0.0 else 0.0
        return cur_r / prev_r

    prev = None
    rs = []
    val = None
    while True:
        progressed = False
        for p in processes:
            progressed = p.step() or progressed
        if not progressed:
            if val is None:
                val = value_fn()
            steps = max(p.m for p in processes)
            if all(p.exhausted for p in processes):
                return val, steps, True, "exhausted"
            return val, steps, False, "budget"
        val = value_fn()
        if prev is not None:
            if abs(prev) > 0.0:
                r = abs(val - prev) / abs(prev)
                rs.append(r)
                rs = rs[-4:]
                converged = False
                if r < cfg.tol and len(rs) == 4 and rs[-2] < cfg.tol \
                        and rs[-3] < np.sqrt(cfg.tol):
                    q = sorted(ratio(a, b) for a, b in zip(rs, rs[1:]))[1]
                    if q < 1.0:
                        converged = r * q / (1.0 - q) < cfg.tol
            else:
                rs.clear()
                converged = abs(val - prev) < 1e-12
            if converged:
                return val, max(p.m for p in processes), True, "rule"
        if all(p.exhausted for p in processes):
            return val, max(p.m for p in processes), True, "exhausted"
        if all(p.m >= cfg.m_max for p in processes):
            return val, max(p.m for p in processes), False, "budget"
        prev = val


def _fd_cancellation_check(value, n, cfg, d):
    floor = 1e3 * MACHINE_EPS * n / cfg.t_step
    if abs(value) < floor:
        warnings.warn(
            f"finite-difference sensitivity {value:.3e} for ({d.i}, {d.j}) is "
            f"below the cancellation floor {floor:.3e}; the difference quotient "
            "has lost its significant digits", RuntimeWarning, stacklevel=3)


def _block_start(n):
    v = np.zeros(2 * n)
    v[n:] = 1.0 / np.sqrt(n)
    return v


def _block_weight(n):
    w = np.zeros(2 * n)
    w[:n] = 1.0 / np.sqrt(n)
    return w


def estimate_arnoldi_block(op, d, cfg, m_fixed=None):
    """Sensitivity along d from Arnoldi on the doubled operator.

    The start vector holds the all-ones part in the lower half; the estimate
    pairs the basis against all-ones in the upper half, so the projected
    off-diagonal exponential block yields the derivative directly.
    ``m_fixed`` skips the stopping rule and runs exactly that many steps.
    """
    counted = _CountedOp(op)
    n = op.n
    block = _BlockFrechetOp(counted, d)
    proc = _ArnoldiProcess(block.matvec, _block_start(n), m_fixed or cfg.m_max)
    wvec = _block_weight(n)

    def value():
        coeffs = wvec @ proc.basis()
        return n * float(coeffs @ _exp0_small(proc.square_h())[:, 0])

    if m_fixed is not None:
        while proc.step():
            pass
        val, steps, conv = value(), proc.m, True
    else:
        val, steps, conv, _ = _drive([proc], value, cfg)
    return SensitivityRecord(direction=d, method="arnoldi-block", value=val,
                             steps=steps, matvecs=counted.count, converged=conv)


def estimate_arnoldi_fd(op, d, cfg, m_fixed=None):
    """Forward-difference sensitivity from two plain Arnoldi runs.

    Both runs start from normalized all-ones; the perturbed operator applies
    the rank-one edge bump implicitly, so each step costs one base matvec
    per run.
    """
    counted = _CountedOp(op)
    n = op.n
    t = cfg.t_step
    start = np.full(n, 1.0 / np.sqrt(n))
    limit = m_fixed or cfg.m_max
    p_base = _ArnoldiProcess(counted.matvec, start, limit)
    p_bumped = _ArnoldiProcess(
        EdgeUpdateOperator(counted, d, t).matvec, start, limit)

    def value():
        e_base = _exp0_small(p_base.square_h())[0, 0]
        e_bump = _exp0_small(p_bumped.square_h())[0, 0]
        return n * (e_bump - e_base) / t

    if m_fixed is not None:
        for p in (p_base, p_bumped):
            while p.step():
                pass
        val, steps, conv = value(), max(p_base.m, p_bumped.m), True
    else:
        val, steps, conv, _ = _drive([p_base, p_bumped], value, cfg)
    _fd_cancellation_check(val, n, cfg, d)
    return SensitivityRecord(direction=d, method="arnoldi-fd", value=val,
                             steps=steps, matvecs=counted.count, converged=conv)


def estimate_lanczos_block(op, d, cfg, m_fixed=None):
    """Sensitivity along d from two-sided Lanczos on the doubled operator.

    ``cfg.scale`` divides the doubled operator during the recurrence (a
    stagnation workaround); the stopping sequence sees the damped problem
    while the returned value is evaluated on the unscaled projection. A
    serious breakdown falls back to ``arnoldi-block``; the fallback is
    recorded in the method tag and the wasted matvecs stay in the count.

    The left start vector lives in the bottom half of the doubled space, so
    its Krylov space is confined there and dies after at most n steps. That
    stalls the recurrence without making the right-side projection exact
    (the evaluation vector is not the left start), so a left-side-only
    exhaustion before the stopping rule fires also falls back.
    """
    counted = _CountedOp(op)
    n = op.n
    block = _BlockFrechetOp(counted, d, scale=cfg.scale)
    start = _block_start(n)
    wvec = _block_weight(n)

    def final(proc):
        with np.errstate(over="ignore", invalid="ignore"):
            coeffs = wvec @ proc.v_basis()
            t_unscaled = cfg.scale * proc.square_t()
            return n * float(coeffs @ _exp0_small(t_unscaled)[:, 0])

    def fallback():
        rec = estimate_arnoldi_block(op, d, cfg, m_fixed=m_fixed)
        return SensitivityRecord(direction=d, method="lanczos-block->arnoldi-block",
                                 value=rec.value, steps=rec.steps,
                                 matvecs=counted.count + rec.matvecs,
                                 converged=rec.converged)

    try:
        proc = _BiorthProcess(block.matvec, block.rmatvec, start, start,
                              m_fixed or cfg.m_max)

        def value():
            # the basis and projection may be non-finite mid-blow-up; the
            # stopping rule and the final finiteness check both tolerate that
            with np.errstate(over="ignore", invalid="ignore"):
                coeffs = wvec @ proc.v_basis()
                return n * float(coeffs @ _exp0_small(proc.square_t())[:, 0])

        if m_fixed is not None:
            while proc.step():
                pass
            if proc.lucky_w and not proc.lucky_v:
                return fallback()
            steps, conv = proc.m, True
        else:
            _, steps, conv, reason = _drive([proc], value, cfg)
            if reason == "exhausted" and proc.lucky_w and not proc.lucky_v:
                return fallback()
        val = final(proc)
        if not np.isfinite(val):
            return fallback()
        return SensitivityRecord(direction=d, method="lanczos-block",
                                 value=val, steps=steps,
                                 matvecs=counted.count, converged=conv)
    except SeriousBreakdownError:
        return fallback()


def estimate_lanczos_fd(op, d, cfg, m_fixed=None):
    """Forward-difference sensitivity from two two-sided Lanczos runs."""
    counted = _CountedOp(op)
    n = op.n
    t = cfg.t_step
    start = np.full(n, 1.0 / np.sqrt(n))
    limit = m_fixed or cfg.m_max
    bumped = EdgeUpdateOperator(counted, d, t)
    try:
        p_base = _BiorthProcess(counted.matvec, counted.rmatvec, start, start, limit)
        p_bumped = _BiorthProcess(bumped.matvec, bumped.rmatvec, start, start, limit)

        def value():
            with np.errstate(over="ignore", invalid="ignore"):
                e_base = _exp0_small(p_base.square_t())[0, 0]
                e_bump = _exp0_small(p_bumped.square_t())[0, 0]
                return n * (e_bump - e_base) / t

        if m_fixed is not None:
            for p in (p_base, p_bumped):
                while p.step():
                    pass
            val, steps, conv = value(), max(p_base.m, p_bumped.m), True
        else:
            val, steps, conv, _ = _drive([p_base, p_bumped], value, cfg)
        if not np.isfinite(val):
            raise SeriousBreakdownError(max(p_base.m, p_bumped.m))
        _fd_cancellation_check(val, n, cfg, d)
        return SensitivityRecord(direction=d, method="lanczos-fd", value=val,
                                 steps=steps, matvecs=counted.count,
                                 converged=conv)
    except SeriousBreakdownError:
        rec = estimate_arnoldi_block(op, d, cfg, m_fixed=m_fixed)
        return SensitivityRecord(direction=d, method="lanczos-fd->arnoldi-block",
                                 value=rec.value, steps=rec.steps,
                                 matvecs=counted.count + rec.matvecs,
                                 converged=rec.converged)


def _unit(n, k):
    v = np.zeros(n)
    v[k] = 1.0
    return v


class _KkrsRun:
    """One coupled pair of Arnoldi spaces for a rank-one direction e_i e_j^T."""

    def __init__(self, counted, i, j, eta, m_max):
        n = counted.n
        self.eta = eta
        self.p_right = _ArnoldiProcess(counted.matvec, _unit(n, i), m_max)
        self.p_left = _ArnoldiProcess(counted.rmatvec, _unit(n, j), m_max)
        self.ones = np.ones(n)

    def step(self):
        a = self.p_right.step()
        b = self.p_left.step()
        return a or b

    @property
    def m(self):
        return max(self.p_right.m, self.p_left.m)

    @property
    def exhausted(self):
        return self.p_right.exhausted and self.p_left.exhausted

    def value(self):
        ma, mb = self.p_right.m, self.p_left.m
        coupled = np.zeros((ma + mb, ma + mb))
        coupled[:ma, :ma] = self.p_right.square_h()
        coupled[ma:, ma:] = self.p_left.square_h().T
        coupled[0, ma] = self.eta
        x_block = scipy.linalg.expm(coupled)[:ma, ma:]
        left = self.ones @ self.p_right.basis()
        right = self.p_left.basis().T @ self.ones
        return float(left @ x_block @ right)


def estimate_kkrs(op, d, cfg, m_fixed=None):
    """Sensitivity along d from the low-rank Fréchet projection.

    Couples a Krylov space of the operator grown from e_i with one of its
    transpose grown from e_j. A symmetric direction on a symmetric operator
    doubles the one-sided value; on an asymmetric operator both orientations
    are estimated in lockstep and summed (the derivative is additive in the
    direction).
    """
    counted = _CountedOp(op)
    limit = m_fixed or cfg.m_max
    sym_shortcut = d.symmetric and getattr(op, "symmetric", False)
    runs = [_KkrsRun(counted, d.i, d.j, cfg.eta, limit)]
    if d.symmetric and not sym_shortcut:
        runs.append(_KkrsRun(counted, d.j, d.i, cfg.eta, limit))
    factor = 2.0 if sym_shortcut else 1.0

    def value():
        return factor * sum(r.value() for r in runs)

    if m_fixed is not None:
        for r in runs:
            while r.step():
                pass
        val, steps, conv = value(), max(r.m for r in runs), True
    else:
        val, steps, conv, _ = _drive(runs, value, cfg)
    return SensitivityRecord(direction=d, method="kkrs", value=val, steps=steps,
                             matvecs=counted.count, converged=conv)


ESTIMATORS = {
    "arnoldi-block": estimate_arnoldi_block,
    "arnoldi-fd": estimate_arnoldi_fd,
    "lanczos-block": estimate_lanczos_block,
    "lanczos-fd": estimate_lanczos_fd,
    "kkrs": estimate_kkrs,
}


def scan_estimated(a, candidates, cfg, workers=1, exact=False,
                   dense_limit=None):
    """Run the configured estimator over every candidate direction.

    Per-direction failures are collected in the result instead of aborting
    the scan. With ``exact=True`` the dense derivative is computed alongside
    each estimate (guarded by the dense size limit) for scatter comparison.
    """
    from concurrent.futures import ThreadPoolExecutor

    from . import dense

    estimator = ESTIMATORS[cfg.method]
    candidates = list(candidates)
    exact_map = None
    arr = None
    if exact:
        arr = dense._as_dense(a, dense_limit or dense.DENSE_LIMIT)

    def one(d):
        try:
            rec = estimator(a, d, cfg)
        except Exception as exc:  # isolate per-direction numerical failures
            return None, (d, f"{type(exc).__name__}: {exc}")
        return rec, None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, candidates))
    else:
        outcomes = [one(d) for d in candidates]

    records = [rec for rec, _ in outcomes if rec is not None]
    failures = [fail for _, fail in outcomes if fail is not None]
    if exact:
        exact_map = {}
        for rec in records:
            d = rec.direction
            exact_map[d.pair()] = dense.total_sensitivity_exact(arr, d)
    records = sort_records(records)
    return ScanResult(records=records, exact=exact_map, failures=failures,
                      aggregate=float(sum(r.value for r in records)))
