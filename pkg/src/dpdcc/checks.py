"""Executable property checks used by ``dpdcc verify``."""

from dataclasses import dataclass

import numpy as np

from dpdcc.compress import Compressor, compressor_error
from dpdcc.graph import RandomRingTopology, consensus_decay_check
from dpdcc.problem import (
    BoxSet,
    LocalizationProblem,
    generate_instance,
    localization_loss,
    localization_loss_gradient,
)

__all__ = [
    "CheckResult",
    "check_compressor",
    "check_consensus",
    "check_projection",
    "check_gradient",
    "run_all",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.6g} (bound {self.bound:.6g}) {self.detail}".rstrip()


def check_compressor(samples=100_000, delta=1, p=2, seed=0):
    """Worst squared sup-norm error of the rounding quantizer."""
    comp = Compressor("round", delta=delta)
    worst = compressor_error(comp, samples, p=p, seed=seed)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-100, 100, size=(samples, p))
    viol = int(np.count_nonzero(np.abs(comp.apply(x) - x) > delta / 2))
    return CheckResult("rounding quantizer error", viol == 0 and worst <= comp.error_bound,
                       worst, comp.error_bound, f"violations={viol}")


def check_consensus(n=10, B=4, windows=100, rho=0.1, seed=0, max_len=80):
    """Products of random windows of mixing matrices against the geometric envelope."""
    topo = RandomRingTopology(n, rho, seed, B)
    consts = topo.constants
    rng = np.random.default_rng(seed)
    worst_ratio, viol = 0.0, 0
    for _ in range(windows):
        s = int(rng.integers(1, 1000))
        t = s + int(rng.integers(0, max_len + 1))
        dev = consensus_decay_check([topo.mixing(r) for r in range(s, t + 1)])
        bound = consts.bound(t - s)
        worst_ratio = max(worst_ratio, dev / bound)
        viol += dev > bound
    return CheckResult("consensus envelope", viol == 0, worst_ratio, 1.0,
                       f"violations={viol} tau={consts.tau:.6g} lambda={consts.lam:.6g}")


def projection_slacks(box, b, c, y):
    """Slacks of the two projection inequalities for ``x = P(b - c)``, row-wise."""
    x = box.project(b - c)
    sq = lambda v: np.sum(v * v, axis=-1)  # noqa: E731
    lhs = 2 * np.sum((x - y) * c, axis=-1)
    first = sq(y - b) - sq(y - x) - sq(x - b) - lhs
    second = np.sqrt(sq(c)) - np.sqrt(sq(x - b))
    return first, second


def check_projection(samples=10_000, p=2, half_width=5.0, seed=0):
    box = BoxSet.cube(p, half_width)
    rng = np.random.default_rng(seed)
    b = box.sample(rng, samples)
    y = box.sample(rng, samples)
    c = rng.normal(scale=half_width, size=(samples, p))
    first, second = projection_slacks(box, b, c, y)
    worst = float(min(first.min(), second.min()))
    return CheckResult("projection inequalities", worst >= -1e-10, worst, -1e-10, "min slack")


def check_gradient(triples=100, n=20, rounds=50, seed=0, h=1e-5):
    """Relative error of the analytic loss gradient against central differences."""
    inst = generate_instance(n, seed=seed)
    prob = LocalizationProblem(inst)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(triples):
        i = int(rng.integers(n))
        t = int(rng.integers(1, rounds + 1))
        x = rng.uniform(prob.box.lower + h, prob.box.upper - h)
        fd = np.array([
            (localization_loss(inst, i, t, x + h * e) - localization_loss(inst, i, t, x - h * e)) / (2 * h)
            for e in np.eye(prob.p)
        ])
        g = localization_loss_gradient(inst, i, t, x)
        worst = max(worst, float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1.0)))
    return CheckResult("loss gradient", worst <= 1e-6, worst, 1e-6, "max relative error")


def run_all(seed=0):
    return [
        check_compressor(seed=seed),
        check_consensus(seed=seed),
        check_projection(seed=seed),
        check_gradient(seed=seed),
    ]
