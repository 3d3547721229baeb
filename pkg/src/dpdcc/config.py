"""
Run configuration and its INI text format.

A run file has one section per block::

    [problem]
    n = 10
    b = 0.01

    [graph]
    rho = 0.1

    [compressor]
    kind = round        ; round | dithered | identity | none (baseline)

    [schedule]
    family = polynomial
    gamma0 = auto       ; min(1 / (4 G2^2), 0.1) from the instance data

    [run]
    T = 4096
    seed = 0

Missing keys take the defaults of the dataclasses below.
"""

import configparser
import math
from dataclasses import asdict, dataclass, field, fields

from dpdcc.compress import Compressor
from dpdcc.engine import Schedule
from dpdcc.graph import RandomRingTopology
from dpdcc.problem import LocalizationProblem, constraint_bound, generate_instance

__all__ = [
    "ProblemConfig",
    "GraphConfig",
    "CompressorConfig",
    "ScheduleConfig",
    "RunOptions",
    "RunConfig",
    "auto_gamma0",
]


@dataclass
class ProblemConfig:
    n: int = 10
    p: int = 2
    m: int = 2
    b: float = 0.01
    half_width: float = 5.0
    allow_no_slater: bool = False


@dataclass
class GraphConfig:
    rho: float = 0.1
    B: int = 4


@dataclass
class CompressorConfig:
    kind: str = "round"
    delta: int = 1
    q: int = 8


@dataclass
class ScheduleConfig:
    family: str = "polynomial"
    alpha0: float = 0.5
    gamma0: object = "auto"
    s0: float = 1.0
    theta1: float = 0.5
    theta2: float = 1.0
    mu: float = 0.9


@dataclass
class RunOptions:
    T: int = 4096
    seed: int = 0
    trace: bool = False
    metrics: bool = True
    stale: bool = False


_BLOCKS = {
    "problem": ProblemConfig,
    "graph": GraphConfig,
    "compressor": CompressorConfig,
    "schedule": ScheduleConfig,
    "run": RunOptions,
}


def auto_gamma0(problem, T, cap=0.1):
    """``min(1 / (4 G2^2), cap)`` with ``G2`` the spectral Jacobian bound."""
    G2 = constraint_bound(problem, max(T, 1))
    return min(1.0 / (4.0 * G2 * G2), cap)


def _parse(value, kind):
    if kind is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(value)
    if kind is float:
        return float(value)
    if kind is object:  # gamma0: number or "auto"
        return value.strip() if value.strip() == "auto" else float(value)
    return value.strip()


@dataclass
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    compressor: CompressorConfig = field(default_factory=CompressorConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    run: RunOptions = field(default_factory=RunOptions)

    @property
    def baseline(self):
        return self.compressor.kind == "none"

    def validate(self):
        """Build every component once so configuration errors surface early."""
        if self.run.T < 0:
            raise ValueError("T must be non-negative")
        self.build_compressor()
        Schedule(**{**asdict(self.schedule), "gamma0": 1.0})
        RandomRingTopology(self.problem.n, self.graph.rho, self.run.seed, self.graph.B)
        generate_instance(self.problem.n, self.problem.p, self.problem.m, self.problem.b,
                          self.run.seed, self.problem.half_width, self.problem.allow_no_slater)
        return self

    def build_compressor(self):
        if self.baseline:
            return None
        c = self.compressor
        return Compressor(c.kind, c.delta, c.q)

    def build(self):
        """Return ``(problem, topology, schedule, compressor)``."""
        pc, run = self.problem, self.run
        inst = generate_instance(pc.n, pc.p, pc.m, pc.b, run.seed, pc.half_width, pc.allow_no_slater)
        problem = LocalizationProblem(inst)
        sc = asdict(self.schedule)
        if sc["gamma0"] == "auto":
            sc["gamma0"] = auto_gamma0(problem, run.T)
        schedule = Schedule(**sc)
        topology = RandomRingTopology(pc.n, self.graph.rho, run.seed, self.graph.B)
        return problem, topology, schedule, self.build_compressor()

    # text format --------------------------------------------------------

    def to_dict(self):
        return {name: asdict(getattr(self, name)) for name in _BLOCKS}

    @classmethod
    def from_dict(cls, data):
        blocks = {}
        for name, klass in _BLOCKS.items():
            raw = dict(data.get(name, {}))
            types = {f.name: f.type for f in fields(klass)}
            unknown = set(raw) - set(types)
            if unknown:
                raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
            kwargs = {}
            for key, value in raw.items():
                kind = {"int": int, "float": float, "bool": bool, "str": str, "object": object}.get(
                    types[key] if isinstance(types[key], str) else types[key].__name__, str)
                kwargs[key] = _parse(value, kind) if isinstance(value, str) else value
            blocks[name] = klass(**kwargs)
        unknown = set(data) - set(_BLOCKS)
        if unknown:
            raise ValueError(f"unknown sections: {sorted(unknown)}")
        return cls(**blocks)

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        parser.read_string(text)
        return cls.from_dict({s: dict(parser[s]) for s in parser.sections()})

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    def to_text(self):
        lines = []
        for name, block in self.to_dict().items():
            lines.append(f"[{name}]")
            for key, value in block.items():
                if isinstance(value, float) and math.isfinite(value):
                    value = repr(value)
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def to_file(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    def with_overrides(self, **dotted):
        """Copy with ``block__key=value`` overrides, e.g. ``run__seed=3``."""
        data = self.to_dict()
        for key, value in dotted.items():
            block, _, name = key.partition("__")
            data[block][name] = value
        return RunConfig.from_dict(data)
