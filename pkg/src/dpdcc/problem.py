"""
Problem oracles.

A :class:`RoundProblem` answers, for agent ``i`` at round ``t``, the local loss
gradient, the local constraint value and the constraint Jacobian.  The module
also ships the online sensor-localization benchmark: ``n`` sensors track a
moving target under random linear constraints ``B x <= b`` that always admit
the origin as a strictly feasible point.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from dpdcc._rng import stream

__all__ = [
    "BoxSet",
    "RoundProblem",
    "LocalizationInstance",
    "LocalizationProblem",
    "ProblemBounds",
    "PreconditionError",
    "SlaterViolationError",
    "generate_instance",
    "localization_loss",
    "localization_loss_gradient",
    "localization_constraint",
    "advance_target",
    "target_increment",
    "estimate_bounds",
    "constraint_bound",
    "save_instance",
    "load_instance",
]

INITIAL_TARGET = (0.8, 0.95)


class PreconditionError(ValueError):
    """An oracle was queried outside its domain."""


class SlaterViolationError(ValueError):
    """The requested constraint data would not admit a Slater point."""


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box ``{x : lower <= x <= upper}``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.size == 0:
            raise ValueError("box bounds must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("box is empty: lower > upper in some component")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, p, half_width):
        return cls(-half_width * np.ones(p), half_width * np.ones(p))

    @property
    def dimension(self):
        return self.lower.size

    @property
    def radius(self):
        """Largest Euclidean norm over the box (attained at a corner)."""
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def contains(self, x, atol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def project(self, x):
        """Euclidean projection; works row-wise on stacked points."""
        return np.clip(x, self.lower, self.upper)

    def corners(self):
        p = self.dimension
        bits = (np.arange(2**p)[:, None] >> np.arange(p)) & 1
        return np.where(bits == 1, self.upper, self.lower)

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, self.dimension))


class RoundProblem:
    """
    Per-agent, per-round oracle interface.

    Subclasses implement :meth:`loss_gradient` and :meth:`constraint`.  The
    stacked ``*_all`` helpers evaluate many (agent, point) pairs at once and
    fall back to loops here; concrete problems override them with vectorized
    versions.  Every agent carries the same number ``m`` of constraints.
    """

    n: int
    m: int
    box: BoxSet

    @property
    def p(self):
        return self.box.dimension

    def loss_gradient(self, i, t, x):
        raise NotImplementedError

    def constraint(self, i, t, x):
        """Return ``(g_{i,t}(x), Jacobian)`` with shapes ``(m,)`` and ``(m, p)``."""
        raise NotImplementedError

    def slater_point(self):
        """A point with ``g_{i,t}(x) <= -margin`` for all i, t, or ``None``."""
        return None

    def linear_constraints(self, t):
        """Stacked ``(A, c)`` with ``g_t(x) = A x - c`` for linear problems."""
        raise NotImplementedError(f"{type(self).__name__} has no linear constraint data")

    # stacked helpers -------------------------------------------------------

    def local_gradients(self, t, points):
        """Row ``i`` is agent ``i``'s loss gradient at ``points[i]``."""
        return np.array([self.loss_gradient(i, t, x) for i, x in enumerate(points)])

    def local_constraints(self, t, points):
        vals, jacs = zip(*(self.constraint(i, t, x) for i, x in enumerate(points)))
        return np.array(vals), np.array(jacs)

    def global_gradients(self, t, points):
        """Gradient of the network-average loss at every row of ``points``."""
        out = np.zeros((len(points), self.p))
        for k, x in enumerate(points):
            for j in range(self.n):
                out[k] += self.loss_gradient(j, t, x)
        return out / self.n

    def global_constraints(self, t, points):
        """Stacked constraint values of all agents at every row of ``points``."""
        return np.array(
            [np.concatenate([self.constraint(j, t, x)[0] for j in range(self.n)]) for x in points]
        )


# ---------------------------------------------------------------------------
# localization benchmark


@dataclass
class LocalizationInstance:
    """
    Random data of the online localization benchmark.

    Round data (target position, noise, constraint matrices) is materialized
    lazily and drawn from per-round seeded streams, so the value at round
    ``t`` never depends on how many rounds were generated before.  Arrays are
    indexed by round: entry ``t`` belongs to round ``t``; entry 0 of
    ``targets`` is the fixed initial position and the other entry-0 slots are
    unused.
    """

    n: int
    p: int
    m: int
    b: float
    seed: int
    half_width: float = 5.0
    sensor_range: float = 10.0
    noise_high: float = 1e-3
    sensors: np.ndarray = None
    targets: np.ndarray = field(default=None, repr=False)
    coins: np.ndarray = field(default=None, repr=False)
    noise: np.ndarray = field(default=None, repr=False)
    B: np.ndarray = field(default=None, repr=False)
    rhs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.sensors is None:
            rng = stream(self.seed, "sensors")
            self.sensors = rng.uniform(-self.sensor_range, self.sensor_range, size=(self.n, self.p))
        if self.targets is None:
            x0 = np.zeros(self.p)
            x0[: min(2, self.p)] = INITIAL_TARGET[: min(2, self.p)]
            self.targets = x0[None, :].copy()
            self.coins = np.zeros(1, dtype=np.int64)
            self.noise = np.zeros((1, self.n))
            self.B = np.zeros((1, self.n, self.m, self.p))
            self.rhs = np.zeros((1, self.n, self.m))

    @property
    def horizon(self):
        """Last materialized round."""
        return len(self.targets) - 1

    @property
    def box(self):
        return BoxSet.cube(self.p, self.half_width)

    def ensure(self, t):
        """Materialize round data up to and including round ``t``."""
        start = self.horizon + 1
        if t < start:
            return
        stop = max(t, 2 * self.horizon, 64)
        rounds = range(start, stop + 1)
        coins = np.array([stream(self.seed, "target", s).integers(0, 2) for s in rounds])
        noise = np.array(
            [stream(self.seed, "noise", s).uniform(0.0, self.noise_high, self.n) for s in rounds]
        )
        B, rhs = [], []
        for s in rounds:
            rng = stream(self.seed, "constraints", s)
            B.append(rng.uniform(0.0, 2.0, size=(self.n, self.m, self.p)))
            rhs.append(rng.uniform(self.b, self.b + 1.0, size=(self.n, self.m)))
        targets = [self.targets[-1]]
        for s in rounds:
            # the increment at round s moves the target from round s to s + 1;
            # round 1 starts at the fixed initial position
            prev = targets[-1]
            if s > 1:
                prev = prev + _pad(target_increment(s - 1, self._coin(s - 1, coins, start)), self.p)
            targets.append(prev)
        self.targets = np.vstack([self.targets, np.array(targets[1:])])
        self.coins = np.concatenate([self.coins, coins])
        self.noise = np.vstack([self.noise, noise])
        self.B = np.concatenate([self.B, np.array(B)])
        self.rhs = np.concatenate([self.rhs, np.array(rhs)])

    def _coin(self, s, fresh, start):
        return int(fresh[s - start]) if s >= start else int(self.coins[s])

    def target(self, t):
        self.ensure(t)
        return self.targets[t]

    def distances(self, t):
        """Noisy squared distances ``D_{i,t}`` for all sensors."""
        self._check_round(t)
        self.ensure(t)
        return np.sum((self.sensors - self.targets[t]) ** 2, axis=1) + self.noise[t]

    def _check_round(self, t, i=None):
        if t < 1:
            raise IndexError(f"round index must be >= 1, got {t}")
        if i is not None and not 0 <= i < self.n:
            raise IndexError(f"agent index {i} out of range for n={self.n}")


def target_increment(t, coin):
    """Displacement of the target between rounds ``t`` and ``t + 1``."""
    if t < 1:
        raise ValueError("the target moves from round 1 on")
    return np.array(
        [(-1.0) ** coin * math.sin(t / 50) / (10 * t), -coin * math.cos(t / 70) / (40 * t)]
    )


def _pad(vec, p):
    out = np.zeros(p)
    out[: min(p, vec.size)] = vec[:p]
    return out


def advance_target(instance, t):
    """Return the target position at round ``t + 1`` (``t >= 1``)."""
    if t < 1:
        raise ValueError("the target moves from round 1 on; round 0 is the fixed start")
    instance.ensure(t + 1)
    return instance.targets[t] + _pad(target_increment(t, int(instance.coins[t])), instance.p)


def generate_instance(n, p=2, m=2, b=0.01, seed=0, half_width=5.0, allow_no_slater=False):
    """
    Draw a localization instance.

    Parameters
    ----------
    n, p, m : int
        Number of sensors, dimension of the search space and number of
        linear constraints per sensor.
    b : float
        Lower end of the right-hand-side interval ``[b, b + 1]``.  ``b > 0``
        makes the origin strictly feasible with margin ``b``.
    seed : int
        Master seed; all random draws derive from it.
    allow_no_slater : bool
        Permit ``b <= 0``.

    Raises
    ------
    SlaterViolationError
        If ``b <= 0`` and ``allow_no_slater`` is not set.
    """
    if n < 1 or p < 1 or m < 1:
        raise ValueError("n, p and m must be positive")
    if b <= 0 and not allow_no_slater:
        raise SlaterViolationError(f"b={b} leaves no Slater margin; pass allow_no_slater=True")
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    return LocalizationInstance(n=n, p=p, m=m, b=float(b), seed=int(seed), half_width=float(half_width))


def _check_point(instance, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.p,):
        raise PreconditionError(f"expected a point of shape ({instance.p},), got {x.shape}")
    if not instance.box.contains(x):
        raise PreconditionError(f"point {x} lies outside the feasible box")
    return x


def localization_loss(instance, i, t, x):
    """``(||S_i - x||^2 - D_{i,t})^2 / 4``."""
    instance._check_round(t, i)
    x = _check_point(instance, x)
    r = np.sum((instance.sensors[i] - x) ** 2) - instance.distances(t)[i]
    return 0.25 * r * r


def localization_loss_gradient(instance, i, t, x):
    """Closed-form gradient ``(||S_i - x||^2 - D_{i,t}) (x - S_i)``."""
    instance._check_round(t, i)
    x = _check_point(instance, x)
    diff = x - instance.sensors[i]
    return (diff @ diff - instance.distances(t)[i]) * diff


def localization_constraint(instance, i, t, x):
    """Return ``(B_{i,t} x - b_{i,t}, B_{i,t})``."""
    instance._check_round(t, i)
    x = _check_point(instance, x)
    instance.ensure(t)
    B = instance.B[t, i]
    return B @ x - instance.rhs[t, i], B.copy()


class LocalizationProblem(RoundProblem):
    """:class:`RoundProblem` view of a :class:`LocalizationInstance`."""

    def __init__(self, instance):
        self.instance = instance
        self.n = instance.n
        self.m = instance.m
        self.box = instance.box

    def loss_gradient(self, i, t, x):
        return localization_loss_gradient(self.instance, i, t, x)

    def constraint(self, i, t, x):
        return localization_constraint(self.instance, i, t, x)

    def slater_point(self):
        return np.zeros(self.p) if self.instance.b > 0 else None

    @property
    def slater_margin(self):
        return self.instance.b

    def linear_constraints(self, t):
        inst = self.instance
        inst.ensure(t)
        return inst.B[t].reshape(-1, self.p), inst.rhs[t].reshape(-1)

    def local_gradients(self, t, points):
        inst = self.instance
        inst._check_round(t)
        diff = points - inst.sensors
        r = np.sum(diff * diff, axis=1) - inst.distances(t)
        return r[:, None] * diff

    def local_constraints(self, t, points):
        inst = self.instance
        inst._check_round(t)
        inst.ensure(t)
        B = inst.B[t]
        return np.einsum("imp,ip->im", B, points) - inst.rhs[t], B

    def global_gradients(self, t, points):
        inst = self.instance
        inst._check_round(t)
        diff = points[:, None, :] - inst.sensors[None, :, :]
        r = np.sum(diff * diff, axis=2) - inst.distances(t)[None, :]
        return np.mean(r[:, :, None] * diff, axis=1)

    def global_constraints(self, t, points):
        A, c = self.linear_constraints(t)
        return points @ A.T - c


@dataclass(frozen=True)
class ProblemBounds:
    """Gradient and smoothness bounds of a problem over its box."""

    G1: float
    G2: float
    G2_frobenius: float
    L: float


def estimate_bounds(problem, rounds, samples=256, seed=0):
    """
    Bound constants of the localization benchmark over rounds ``1..rounds``.

    ``G1`` is the largest loss-gradient norm found on the box corners, a
    regular grid and ``samples`` uniform points.  ``G2`` is the largest
    spectral norm of a constraint Jacobian (``G2_frobenius`` the Frobenius
    counterpart); both are exact for linear constraints.  ``L`` is an
    analytic upper bound on the Hessian norm
    ``||2 (x - S)(x - S)^T + (||x - S||^2 - D) I|| <= 3 r^2 + D`` with ``r``
    the largest sensor-to-box distance, so it is a valid Lipschitz constant.
    """
    inst = problem.instance
    inst.ensure(rounds)
    box = problem.box
    rng = np.random.default_rng(seed)
    grid_axes = [np.linspace(lo, hi, 9) for lo, hi in zip(box.lower, box.upper)]
    grid = np.stack(np.meshgrid(*grid_axes), axis=-1).reshape(-1, box.dimension)
    pts = np.vstack([box.corners(), grid, box.sample(rng, samples)])

    dmax = 0.0
    G1 = 0.0
    for t in range(1, rounds + 1):
        D = inst.distances(t)
        dmax = max(dmax, float(D.max()))
        diff = pts[:, None, :] - inst.sensors[None, :, :]
        r = np.sum(diff * diff, axis=2) - D[None, :]
        G1 = max(G1, float(np.max(np.abs(r) * np.sqrt(np.sum(diff * diff, axis=2)))))

    G2 = constraint_bound(problem, rounds)
    G2F = constraint_bound(problem, rounds, norm="frobenius")
    far = np.max(np.linalg.norm(box.corners()[:, None, :] - inst.sensors[None], axis=2))
    L = 3.0 * far**2 + dmax
    return ProblemBounds(G1=G1, G2=G2, G2_frobenius=G2F, L=float(L))


def constraint_bound(problem, rounds, norm="spectral"):
    """Largest constraint-Jacobian norm over rounds ``1..rounds``."""
    inst = problem.instance
    inst.ensure(rounds)
    B = inst.B[1 : rounds + 1].reshape(-1, inst.m, inst.p)
    if norm == "spectral":
        return float(np.max(np.linalg.norm(B, ord=2, axis=(1, 2))))
    if norm == "frobenius":
        return float(np.max(np.linalg.norm(B, axis=(1, 2))))
    raise ValueError(f"unknown norm {norm!r}")


# ---------------------------------------------------------------------------
# plain-text serialization

_ARRAYS = ("sensors", "targets", "coins", "noise", "B", "rhs")


def _hex(values):
    return " ".join(float(v).hex() for v in np.ravel(values))


def save_instance(instance, path):
    """Write ``instance`` as ``key = value`` lines with hex-encoded floats."""
    lines = [
        "# localization instance",
        f"n = {instance.n}",
        f"p = {instance.p}",
        f"m = {instance.m}",
        f"b = {float(instance.b).hex()}",
        f"seed = {instance.seed}",
        f"half_width = {float(instance.half_width).hex()}",
        f"sensor_range = {float(instance.sensor_range).hex()}",
        f"noise_high = {float(instance.noise_high).hex()}",
        f"horizon = {instance.horizon}",
    ]
    for name in _ARRAYS:
        arr = getattr(instance, name)
        shape = "x".join(str(s) for s in arr.shape)
        lines.append(f"{name}.shape = {shape}")
        lines.append(f"{name} = {_hex(arr)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path):
    """Inverse of :func:`save_instance`; the round trip is bit-exact."""
    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()

    def arr(name):
        shape = tuple(int(s) for s in fields[f"{name}.shape"].split("x"))
        flat = [float.fromhex(v) for v in fields[name].split()] if fields[name] else []
        return np.array(flat, dtype=float).reshape(shape)

    return LocalizationInstance(
        n=int(fields["n"]),
        p=int(fields["p"]),
        m=int(fields["m"]),
        b=float.fromhex(fields["b"]),
        seed=int(fields["seed"]),
        half_width=float.fromhex(fields["half_width"]),
        sensor_range=float.fromhex(fields["sensor_range"]),
        noise_high=float.fromhex(fields["noise_high"]),
        sensors=arr("sensors"),
        targets=arr("targets"),
        coins=arr("coins").astype(np.int64),
        noise=arr("noise"),
        B=arr("B"),
        rhs=arr("rhs"),
    )
