"""
Round-synchronous primal-dual simulator.

Each round every agent ``i``

1. broadcasts the compressed, rescaled innovation
   ``C((z_i - zhat_i) / s_t)`` and every estimate ``zhat_j`` advances to
   ``P_X(zhat_j + s_t * C(...))``;
2. mixes the estimates of its in-neighbors, ``x_i = sum_j W_ij zhat_j``;
3. takes a primal-dual step: ``v_i = gamma_t [g_i(x_i)]_+``,
   ``omega_i = grad f_i(x_i) + J_i(x_i)^T v_i`` and
   ``z_i <- P_X(x_i - alpha_t omega_i)``.

The uncompressed baseline skips step 1 and mixes the raw iterates ``z``.
All agents are advanced together as stacked arrays; row ``i`` is agent ``i``.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from dpdcc._rng import stream
from dpdcc.compress import Compressor, bit_cost, lattice_overflow
from dpdcc.metrics import RunHistory

__all__ = [
    "Schedule",
    "NetworkState",
    "AgentState",
    "RoundRecord",
    "schedule_at",
    "positive_part",
    "project_box",
    "initial_state",
    "compressed_round",
    "baseline_round",
    "simulate",
    "run",
]

log = logging.getLogger(__name__)

S_FLOOR = 1e-300


@dataclass(frozen=True)
class Schedule:
    """
    Step size ``alpha_t``, regularization ``gamma_t`` and scaling ``s_t``.

    ``polynomial``: ``alpha_t = alpha0 / t**theta1``, ``s_t = s0 / t**theta2``.
    ``geometric``: ``alpha_t = alpha0 * sqrt(Psi_t / t)`` with
    ``Psi_t = mu + ... + mu**t``, ``s_t = s0 * mu**t``.
    Both use ``gamma_t = gamma0 / alpha_t``.
    """

    family: str = "polynomial"
    alpha0: float = 1.0
    gamma0: float = 0.1
    s0: float = 1.0
    theta1: float = 0.5
    theta2: float = 1.0
    mu: float = 0.9

    def __post_init__(self):
        if self.family not in ("polynomial", "geometric"):
            raise ValueError(f"unknown schedule family {self.family!r}")
        if min(self.alpha0, self.gamma0, self.s0) <= 0:
            raise ValueError("alpha0, gamma0 and s0 must be positive")
        if self.family == "polynomial":
            if not 0 < self.theta1 < 1:
                raise ValueError("theta1 must lie in (0, 1)")
            if not self.theta2 > self.theta1:
                raise ValueError("theta2 must exceed theta1")
        elif not 0 < self.mu < 1:
            raise ValueError("mu must lie in (0, 1)")

    def at(self, t):
        return schedule_at(self, t)

    def check_gamma0(self, G2):
        """Raise unless ``gamma0 <= 1 / (4 G2^2)``."""
        limit = 1.0 / (4.0 * G2 * G2)
        if self.gamma0 > limit * (1 + 1e-12):
            raise ValueError(f"gamma0={self.gamma0} exceeds 1/(4 G2^2)={limit}")


def schedule_at(schedule, t):
    """Return ``(alpha_t, gamma_t, s_t)`` for round ``t >= 1``."""
    if t < 1:
        raise ValueError("rounds start at t = 1")
    sch = schedule
    if sch.family == "polynomial":
        alpha = sch.alpha0 / t**sch.theta1
        s = sch.s0 / t**sch.theta2
    else:
        psi = sch.mu * (1.0 - sch.mu**t) / (1.0 - sch.mu)
        alpha = sch.alpha0 * math.sqrt(psi / t)
        s = sch.s0 * sch.mu**t
    if s < S_FLOOR:
        log.warning("s_t=%g underflows at round %d; floored", s, t)
        s = np.finfo(float).tiny
    return alpha, sch.gamma0 / alpha, s


def positive_part(v):
    return np.maximum(v, 0.0)


def project_box(x, box):
    return box.project(x)


@dataclass
class AgentState:
    z: np.ndarray
    x: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    t: int


@dataclass
class NetworkState:
    """
    Stacked state of all agents before round ``t``.

    ``z`` holds ``z_{i,t}``; ``zhat`` the estimates ``zhat_{j,t-1}`` (one
    canonical row per owner); ``x``, ``v`` and ``omega`` the quantities of the
    previous round.  With ``stale=True`` every agent keeps its own estimate
    table in ``tables[i, j]``, touched only when ``j`` is an in-neighbor.
    """

    z: np.ndarray
    zhat: np.ndarray
    x: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    t: int = 1
    tables: np.ndarray = None

    def agent(self, i):
        return AgentState(self.z[i].copy(), self.x[i].copy(), self.v[i].copy(), self.omega[i].copy(), self.t)

    def copy(self):
        return replace(
            self,
            **{k: getattr(self, k).copy() for k in ("z", "zhat", "x", "v", "omega")},
            tables=None if self.tables is None else self.tables.copy(),
        )


def initial_state(problem, z0=None, stale=False):
    """``z_{i,1} = z0`` (default: box center) and ``zhat_{j,0} = 0``."""
    n, p, m = problem.n, problem.p, problem.m
    if z0 is None:
        z0 = np.tile(0.5 * (problem.box.lower + problem.box.upper), (n, 1))
    z0 = np.array(np.broadcast_to(z0, (n, p)), dtype=float)
    if not all(problem.box.contains(row) for row in z0):
        raise ValueError("initial iterates must lie in the box")
    return NetworkState(
        z=z0,
        zhat=np.zeros((n, p)),
        x=np.zeros((n, p)),
        v=np.zeros((n, m)),
        omega=np.zeros((n, p)),
        t=1,
        tables=np.zeros((n, n, p)) if stale else None,
    )


@dataclass
class RoundRecord:
    t: int
    x: np.ndarray
    g: np.ndarray
    grad: np.ndarray
    edges: int
    messages: int
    bits: int
    overflow: int = 0
    zhat: np.ndarray = None
    payload: np.ndarray = None


def _mix(W, points, box):
    # a convex combination of box points can leave the box by an ulp; the
    # projection is the identity in exact arithmetic
    return project_box(W @ points, box)


def _primal_dual(state, problem, x, schedule, t):
    """Shared dual, direction and primal updates on the mixed points ``x``."""
    alpha, gamma, _ = schedule_at(schedule, t)
    g, J = problem.local_constraints(t, x)
    grad = problem.local_gradients(t, x)
    v = gamma * positive_part(g)
    omega = grad + np.einsum("imp,im->ip", J, v)
    with np.errstate(over="ignore", invalid="ignore"):
        step = x - alpha * omega
    if not np.all(np.isfinite(step)):
        raise FloatingPointError(f"non-finite primal step at round {t}")
    z = project_box(step, problem.box)
    new = NetworkState(z=z, zhat=state.zhat, x=x, v=v, omega=omega, t=t + 1, tables=state.tables)
    _guard(new, t)
    return new, g, grad


def _guard(state, t):
    for name in ("z", "x", "v", "omega", "zhat"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise FloatingPointError(f"non-finite {name} at round {t}")


def compressed_round(state, problem, graph, W, schedule, compressor, rngs=None):
    """
    Advance every agent through one round of the compressed algorithm.

    Parameters
    ----------
    state : NetworkState
        State before round ``state.t``.
    graph : GraphRound
        Communication graph of the round; sets the message count.
    W : ndarray
        Doubly stochastic mixing matrix of the round.
    rngs : list of numpy.random.Generator, optional
        Per-agent generators, required by stochastic compressors.

    Returns
    -------
    (NetworkState, RoundRecord)
    """
    t = state.t
    _, _, s = schedule_at(schedule, t)
    box = problem.box
    W = getattr(W, "W", W)
    overflow = 0
    if compressor.exact:
        sent = k = state.z
        zhat = project_box(state.z, box)
    else:
        scaled = (state.z - state.zhat) / s
        if compressor.stochastic:
            k = np.array([compressor.lattice(row, rng) for row, rng in zip(scaled, rngs)])
        else:
            k = compressor.lattice(scaled)
        overflow = int(lattice_overflow(k, compressor.q).sum())
        sent = s * compressor.delta * k
        zhat = project_box(state.zhat + sent, box)

    tables = state.tables
    if tables is None:
        x = _mix(W, zhat, box)
    else:
        recv = graph.adjacency | np.eye(problem.n, dtype=bool)
        # each message is applied to the receiver's own copy of the sender's estimate
        if compressor.exact:
            updated = np.broadcast_to(zhat[None], tables.shape)
        else:
            updated = project_box(tables + sent[None], box)
        tables = np.where(recv[:, :, None], updated, tables)
        x = project_box(np.einsum("ij,ijp->ip", W, tables), box)
        zhat = tables[np.arange(problem.n), np.arange(problem.n)]

    mid = replace(state, zhat=zhat, tables=tables)
    new, g, grad = _primal_dual(mid, problem, x, schedule, t)
    edges = graph.edge_count
    record = RoundRecord(
        t=t, x=x, g=g, grad=grad, edges=edges, messages=problem.n,
        bits=edges * bit_cost(compressor, problem.p), overflow=overflow, zhat=zhat,
        payload=k,
    )
    return new, record


def baseline_round(state, problem, graph, W, schedule):
    """One round of the uncompressed method: agents mix raw iterates."""
    t = state.t
    W = getattr(W, "W", W)
    x = _mix(W, state.z, problem.box)
    new, g, grad = _primal_dual(state, problem, x, schedule, t)
    edges = graph.edge_count
    record = RoundRecord(
        t=t, x=x, g=g, grad=grad, edges=edges, messages=problem.n,
        bits=edges * bit_cost(Compressor("identity"), problem.p), payload=state.z,
    )
    return new, record


def simulate(problem, topology, schedule, compressor=None, T=0, seed=0, metrics=True,
             trace=False, stale=False, z0=None, config=None):
    """
    Run ``T`` rounds and return a :class:`~dpdcc.metrics.RunHistory`.

    ``compressor=None`` selects the uncompressed baseline.  With
    ``metrics=True`` every agent's point is also evaluated against the
    network-average loss and the stacked constraints of all agents, which
    the regret and violation metrics need.
    """
    n, p, m = problem.n, problem.p, problem.m
    state = initial_state(problem, z0=z0, stale=stale)
    rngs = None
    if compressor is not None and compressor.stochastic:
        rngs = [stream(seed, "dither", i) for i in range(n)]
    hist = RunHistory(
        n=n, p=p, m=m, config=dict(config or {}), problem=problem,
        inner=np.zeros((T, n)) if metrics else None,
        global_grad=np.zeros((T, n, p)) if metrics else None,
        violation=np.zeros((T, n)),
        bits=np.zeros(T, dtype=np.int64),
        edges=np.zeros(T, dtype=np.int64),
        messages=np.zeros(T, dtype=np.int64),
        overflow=np.zeros(T, dtype=np.int64),
        consensus_error=np.zeros(T),
        estimate_error=np.full((T, n), np.nan),
        infeasible={"x": 0, "z": 0, "zhat": 0, "v": 0},
    )
    if trace:
        hist.trace = {k: np.zeros((T, n, d)) for k, d in
                      (("x", p), ("z", p), ("zhat", p), ("v", m), ("omega", p), ("payload", p))}
        hist.trace["adjacency"] = np.zeros((T, n, n), dtype=bool)
    box = problem.box

    def outside(a):
        return int(np.count_nonzero(np.any((a < box.lower) | (a > box.upper), axis=-1)))

    prev_x = None
    for t in range(1, T + 1):
        graph = topology.graph(t)
        W = topology.mixing(t)
        z_before = state.z
        if compressor is None:
            state, rec = baseline_round(state, problem, graph, W, schedule)
        else:
            state, rec = compressed_round(state, problem, graph, W, schedule, compressor, rngs)
        k = t - 1
        hist.bits[k] = rec.bits
        hist.edges[k] = rec.edges
        hist.messages[k] = rec.messages
        hist.overflow[k] = rec.overflow
        if rec.zhat is not None and prev_x is not None:
            # estimate drift of the previous round: zhat_{i,t} - x_{i,t-1}
            hist.estimate_error[k - 1] = np.linalg.norm(rec.zhat - prev_x, axis=1)
        prev_x = rec.x
        hist.consensus_error[k] = np.max(np.linalg.norm(rec.x - rec.x.mean(axis=0), axis=1))
        if metrics:
            gg = problem.global_gradients(t, rec.x)
            hist.global_grad[k] = gg
            hist.inner[k] = np.einsum("ip,ip->i", gg, rec.x)
        gall = problem.global_constraints(t, rec.x)
        hist.violation[k] = np.linalg.norm(positive_part(gall), axis=1)
        inf = hist.infeasible
        inf["x"] += outside(rec.x)
        inf["z"] += outside(z_before) + (outside(state.z) if t == T else 0)
        if rec.zhat is not None:
            inf["zhat"] += outside(rec.zhat)
        inf["v"] += int(np.count_nonzero(np.any(state.v < 0, axis=1)))
        if trace:
            hist.trace["x"][k] = rec.x
            hist.trace["z"][k] = z_before
            hist.trace["zhat"][k] = rec.zhat if rec.zhat is not None else np.nan
            hist.trace["v"][k] = state.v
            hist.trace["omega"][k] = state.omega
            hist.trace["payload"][k] = rec.payload if rec.payload is not None else np.nan
            hist.trace["adjacency"][k] = graph.adjacency
    hist.final_state = state
    return hist


def run(config):
    """Build the components described by a :class:`~dpdcc.config.RunConfig` and simulate."""
    config.validate()
    problem, topology, schedule, compressor = config.build()
    opts = config.run
    return simulate(
        problem, topology, schedule, compressor, T=opts.T, seed=opts.seed,
        metrics=opts.metrics, trace=opts.trace, stale=opts.stale, config=config.to_dict(),
    )
