"""
Network regret, cumulative constraint violation and growth-rate fits.

Regret compares the agents' trajectories against the best fixed point of the
accumulated feasible set ``X_T`` (box plus every constraint revealed up to
round ``T``), using the linearization ``<grad f_t(x_{i,t}), x_{i,t} - x>`` of
the network-average loss.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "RunHistory",
    "FeasibleSetSnapshot",
    "RegretUnavailable",
    "InfeasibleError",
    "ConvergenceError",
    "accumulate_gradient",
    "minimize_linear_over_feasible",
    "grid_minimum",
    "network_regret",
    "network_ccv",
    "growth_exponent",
    "checkpoint_grid",
    "checkpoint_table",
]

log = logging.getLogger(__name__)


class RegretUnavailable(RuntimeError):
    """The history was recorded without the omniscient regret terms."""


class InfeasibleError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass
class RunHistory:
    """
    Per-round log of a simulation.

    Row ``t - 1`` of every array belongs to round ``t``.  ``inner[t-1, i]`` is
    ``<grad f_t(x_{i,t}), x_{i,t}>`` and ``global_grad[t-1, i]`` is
    ``grad f_t(x_{i,t})`` for the network-average loss ``f_t``; both are
    ``None`` when metrics were disabled.  ``violation[t-1, i]`` is the
    Euclidean norm of the positive part of the stacked constraints of all
    agents at ``x_{i,t}``.
    """

    n: int
    p: int
    m: int
    config: dict = field(default_factory=dict)
    problem: object = field(default=None, repr=False)
    inner: np.ndarray = None
    global_grad: np.ndarray = None
    violation: np.ndarray = None
    bits: np.ndarray = None
    edges: np.ndarray = None
    messages: np.ndarray = None
    overflow: np.ndarray = None
    consensus_error: np.ndarray = None
    estimate_error: np.ndarray = None
    infeasible: dict = field(default_factory=dict)
    trace: dict = None
    final_state: object = None

    @property
    def T(self):
        return 0 if self.bits is None else len(self.bits)

    @property
    def regret_enabled(self):
        return self.global_grad is not None

    def cumulative_bits(self):
        return np.cumsum(self.bits) if self.T else np.zeros(0, dtype=np.int64)

    def feasible_set(self, T=None):
        T = self.T if T is None else T
        return FeasibleSetSnapshot.from_problem(self.problem, T)


@dataclass(frozen=True)
class FeasibleSetSnapshot:
    """Box plus stacked halfspaces ``A x <= c``."""

    lower: np.ndarray
    upper: np.ndarray
    A: np.ndarray
    c: np.ndarray
    slater: np.ndarray = None

    @classmethod
    def from_problem(cls, problem, T):
        if T >= 1:
            parts = [problem.linear_constraints(t) for t in range(1, T + 1)]
            A = np.vstack([a for a, _ in parts])
            c = np.concatenate([c for _, c in parts])
        else:
            A = np.zeros((0, problem.p))
            c = np.zeros(0)
        return cls(problem.box.lower, problem.box.upper, A, c, problem.slater_point())

    @property
    def dimension(self):
        return self.lower.size

    def max_violation(self, x):
        x = np.asarray(x, float)
        box = max(np.max(self.lower - x), np.max(x - self.upper), 0.0)
        lin = np.max(self.A @ x - self.c, initial=0.0)
        return float(max(box, lin))


def accumulate_gradient(history, i, T=None):
    """``sum_{t<=T} grad f_t(x_{i,t})``."""
    if not history.regret_enabled:
        raise RegretUnavailable("regret unavailable: run was recorded without metrics")
    T = history.T if T is None else T
    return history.global_grad[:T, i].sum(axis=0)


def _linprog(cost, A, c, lower, upper):
    res = linprog(cost, A_ub=A if len(A) else None, b_ub=c if len(A) else None,
                  bounds=list(zip(lower, upper)), method="highs")
    if res.status == 2:
        raise InfeasibleError("feasible set is empty")
    if res.status != 0:
        raise ConvergenceError(f"LP solver failed: {res.message}")
    return res.x


def _cutting_plane(cost, snap, tol, max_iter=200):
    """Solve the LP on a growing working set of the most violated rows."""
    A, c = snap.A, snap.c
    if len(A) == 0:
        return _linprog(cost, A, c, snap.lower, snap.upper)
    scale = np.linalg.norm(A, axis=1)
    scale[scale == 0] = 1.0
    active = np.zeros(len(A), bool)
    # seed with the rows most aligned against the cost direction
    seed = np.argsort(-(A @ -cost) / scale)[: 4 * snap.dimension]
    active[seed] = True
    for _ in range(max_iter):
        x = _linprog(cost, A[active], c[active], snap.lower, snap.upper)
        viol = (A @ x - c) / scale
        worst = np.argsort(-viol)[: 2 * snap.dimension]
        worst = worst[viol[worst] > tol]
        if worst.size == 0:
            return x
        active[worst] = True
    raise ConvergenceError("cutting-plane loop did not converge", best=x)


def _repair(x, snap, tol):
    """Pull ``x`` toward the Slater point until every constraint holds."""
    if snap.max_violation(x) <= tol or snap.slater is None:
        return x
    lo, hi = 0.0, 1.0
    xs = snap.slater
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if snap.max_violation((1 - mid) * x + mid * xs) <= tol:
            hi = mid
        else:
            lo = mid
    return (1 - hi) * x + hi * xs


def _penalty(cost, snap, tol, iters=6000, rho=None):
    """
    Projected subgradient descent on ``<c, x> + rho * sum_k [a_k x - c_k]_+``
    over the box, started at the Slater point, with geometrically shrinking
    normalized steps, followed by feasibility repair of the best iterate.
    """
    cn = np.linalg.norm(cost)
    rho = 10.0 * max(cn, 1e-12) if rho is None else rho
    x = snap.slater.copy() if snap.slater is not None else 0.5 * (snap.lower + snap.upper)
    step = 0.5 * np.linalg.norm(snap.upper - snap.lower)
    decay = (1e-10) ** (1.0 / iters)
    best, best_val = x.copy(), np.inf
    for _ in range(iters):
        viol = snap.A @ x - snap.c
        val = cost @ x + rho * viol[viol > 0].sum()
        if val < best_val:
            best, best_val = x.copy(), val
        sub = cost + rho * snap.A[viol > 0].sum(axis=0)
        gn = np.linalg.norm(sub)
        if gn == 0:
            break
        x = np.clip(x - step * sub / gn, snap.lower, snap.upper)
        step *= decay
    return _repair(best, snap, tol)


def minimize_linear_over_feasible(cost, snapshot, tol=1e-12, method="lp"):
    """
    Minimize ``<cost, x>`` over a :class:`FeasibleSetSnapshot`.

    ``method="lp"`` solves the linear program exactly (HiGHS on a
    cutting-plane working set); ``method="penalty"`` runs the exact-penalty
    projected subgradient method.  ``tol`` is the scaled constraint
    violation accepted by the cutting-plane loop.  Returns ``(x, value)``.
    """
    cost = np.asarray(cost, float)
    if not np.any(cost):
        x = snapshot.slater if snapshot.slater is not None else _linprog(
            cost, snapshot.A, snapshot.c, snapshot.lower, snapshot.upper)
        return np.array(x, float), 0.0
    if method == "lp":
        x = _cutting_plane(cost, snapshot, tol)
    elif method == "penalty":
        x = _penalty(cost, snapshot, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    x = np.clip(x, snapshot.lower, snapshot.upper)
    if snapshot.max_violation(x) > 1e-9:
        x = _repair(x, snapshot, 0.0)
    return x, float(cost @ x)


def _grid_feasible(pts, snapshot, chunk=2_000_000):
    ok = np.ones(len(pts), bool)
    rows = max(1, chunk // max(len(snapshot.A), 1))
    for k in range(0, len(pts), rows):
        block = pts[k : k + rows]
        if len(snapshot.A):
            ok[k : k + rows] = np.all(block @ snapshot.A.T <= snapshot.c, axis=1)
    return ok


def grid_minimum(cost, snapshot, resolution=1e-3, refine=3):
    """
    Brute-force minimum of ``<cost, x>`` for ``p <= 2``.

    Evaluates a regular grid over the box, keeps feasible points, then
    re-grids a neighborhood of the best point ``refine`` times at ten-fold
    finer spacing until ``resolution`` is reached.
    """
    if snapshot.dimension > 2:
        raise ValueError("grid search only for p <= 2")
    lo, hi = snapshot.lower.copy(), snapshot.upper.copy()
    step = (hi - lo).max() / 400
    best = None
    while True:
        axes = [np.arange(a, b + step / 2, step) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes), -1).reshape(-1, snapshot.dimension)
        pts = np.clip(pts, snapshot.lower, snapshot.upper)
        ok = _grid_feasible(pts, snapshot)
        if not ok.any():
            if best is None:
                raise InfeasibleError("no feasible grid point")
        else:
            cand = pts[ok][np.argmin(pts[ok] @ cost)]
            if best is None or cost @ cand < cost @ best:
                best = cand
        if step <= resolution or refine <= 0:
            return best, float(cost @ best)
        lo = np.maximum(best - 20 * step, snapshot.lower)
        hi = np.minimum(best + 20 * step, snapshot.upper)
        step = max(step / 10, resolution)
        refine -= 1


def network_regret(history, T=None, snapshot=None, method="lp"):
    """Network regret after ``T`` rounds (signed, may be negative)."""
    if not history.regret_enabled:
        raise RegretUnavailable("regret unavailable: run was recorded without metrics")
    T = history.T if T is None else T
    if T == 0:
        return 0.0
    snapshot = history.feasible_set(T) if snapshot is None else snapshot
    total = 0.0
    for i in range(history.n):
        cost = accumulate_gradient(history, i, T)
        _, best = minimize_linear_over_feasible(cost, snapshot, method=method)
        total += history.inner[:T, i].sum() - best
    return total / history.n


def network_ccv(history, T=None):
    """Cumulative violation after ``T`` rounds; correctly rounded, so monotone in ``T``."""
    T = history.T if T is None else T
    return math.fsum(history.violation[:T].ravel()) / history.n


def growth_exponent(Ts, values):
    """
    Least-squares slope of ``log value`` against ``log T``.

    Non-positive values are dropped (and logged); at least four usable
    points are required.
    """
    Ts = np.asarray(Ts, float)
    values = np.asarray(values, float)
    keep = values > 0
    if not keep.all():
        log.info("growth fit: dropping %d non-positive checkpoints", int((~keep).sum()))
    if keep.sum() < 4:
        raise ValueError("need at least four positive checkpoints for a slope fit")
    slope, _ = np.polyfit(np.log(Ts[keep]), np.log(values[keep]), 1)
    return float(slope)


def checkpoint_grid(T, start=32):
    """Powers of two from ``start`` up to ``T``, plus ``T`` itself."""
    grid = []
    k = start
    while k <= T:
        grid.append(k)
        k *= 2
    if T >= 1 and (not grid or grid[-1] != T):
        grid.append(T)
    return grid


def checkpoint_table(history, checkpoints=None, baseline_bits=None, method="lp"):
    """
    Rows of ``T, NetReg, NetCCV, bits_compressed, bits_baseline,
    slope_reg_so_far, slope_ccv_so_far``.

    ``baseline_bits`` is the cumulative bit series of a paired uncompressed
    run; without it the column is what this run would have cost with 64-bit
    floats on the same topology.
    """
    checkpoints = checkpoint_grid(history.T) if checkpoints is None else checkpoints
    cum = history.cumulative_bits()
    if baseline_bits is None:
        baseline_bits = np.cumsum(history.edges) * history.p * 64
    rows, regs, ccvs = [], [], []
    for T in checkpoints:
        reg = network_regret(history, T, method=method) if history.regret_enabled else float("nan")
        ccv = network_ccv(history, T)
        regs.append(abs(reg))
        ccvs.append(ccv)
        Ts = checkpoints[: len(regs)]
        try:
            sreg = growth_exponent(Ts, regs)
        except ValueError:
            sreg = float("nan")
        try:
            sccv = growth_exponent(Ts, ccvs)
        except ValueError:
            sccv = float("nan")
        rows.append((T, reg, ccv, int(cum[T - 1]), int(baseline_bits[T - 1]), sreg, sccv))
    return rows
