"""
Experiment campaigns: many run configurations times many seeds.

Each (config, seed) pair writes ``<name>_seed<seed>.csv`` with one row per
checkpoint; ``summary.csv`` collects the final values per run plus
mean/min/max rows per configuration.
"""

import configparser
import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from dpdcc.config import RunConfig
from dpdcc.engine import run
from dpdcc.metrics import checkpoint_grid, checkpoint_table, growth_exponent

__all__ = [
    "Campaign",
    "CSV_COLUMNS",
    "SUMMARY_COLUMNS",
    "run_campaign",
    "preset_paper_experiment",
    "write_history_csv",
    "read_history_csv",
    "fit_slopes",
    "DESK_T",
    "FULL_T",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("T", "NetReg", "NetCCV", "bits_compressed", "bits_baseline",
               "slope_reg_so_far", "slope_ccv_so_far")
SUMMARY_COLUMNS = ("config", "seed", "status", "T", "NetReg", "NetCCV", "bits",
                   "slope_reg", "slope_ccv", "overflow")
DESK_T = 4096
FULL_T = 10_000
SLOPE_WINDOW = 5


@dataclass
class Campaign:
    configs: dict = field(default_factory=dict)
    seeds: tuple = (0,)
    out: str = "results"
    checkpoint_start: int = 32
    summary: str = "summary.csv"

    def validate(self):
        for cfg in self.configs.values():
            cfg.validate()
        return self

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        parser.read_string(text)
        head = parser["campaign"] if parser.has_section("campaign") else {}
        configs = {}
        for name in parser.sections():
            if name == "campaign":
                continue
            blocks = {}
            for key, value in parser[name].items():
                block, _, sub = key.partition(".")
                if not sub:
                    raise ValueError(f"[{name}] key {key!r} must look like block.field")
                blocks.setdefault(block, {})[sub] = value
            configs[name] = RunConfig.from_dict(blocks)
        return cls(
            configs=configs,
            seeds=tuple(int(s) for s in head.get("seeds", "0").split()),
            out=head.get("out", "results"),
            checkpoint_start=int(head.get("checkpoint_start", 32)),
        )

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    def to_text(self):
        lines = ["[campaign]", f"seeds = {' '.join(str(s) for s in self.seeds)}",
                 f"out = {self.out}", f"checkpoint_start = {self.checkpoint_start}", ""]
        for name, cfg in self.configs.items():
            lines.append(f"[{name}]")
            for block, values in cfg.to_dict().items():
                if block == "run" and "seed" in values:
                    values = {k: v for k, v in values.items() if k != "seed"}
                for key, value in values.items():
                    lines.append(f"{block}.{key} = {value!r}" if isinstance(value, float) else f"{block}.{key} = {value}")
            lines.append("")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_history_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_history_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in reader]


def fit_slopes(rows, window=SLOPE_WINDOW):
    """Slopes of ``|NetReg|`` and ``NetCCV`` over the last ``window`` checkpoints."""
    tail = rows[-window:]
    Ts = [r["T"] for r in tail]
    out = []
    for key in ("NetReg", "NetCCV"):
        try:
            out.append(growth_exponent(Ts, [abs(r[key]) for r in tail]))
        except ValueError:
            out.append(math.nan)
    return tuple(out)


def _bits_rows(history, q):
    """Cumulative bit counts of the compressed and the 64-bit scheme on the run's topology."""
    per_round = np.cumsum(history.edges) * history.p
    return per_round * q, per_round * 64


def run_campaign(campaign, force=False, on_history=None):
    """
    Execute every (config, seed) pair and write CSV files.

    Returns ``(summary_rows, failures)``; a failing run is recorded with
    status ``error`` and the campaign carries on. ``on_history`` is called
    as ``on_history(name, seed, history)`` after each successful run.
    """
    campaign.validate()
    os.makedirs(campaign.out, exist_ok=True)
    planned = [os.path.join(campaign.out, f"{name}_seed{seed}.csv")
               for name in campaign.configs for seed in campaign.seeds]
    planned.append(os.path.join(campaign.out, campaign.summary))
    if not force:
        clash = [p for p in planned if os.path.exists(p)]
        if clash:
            raise FileExistsError(f"refusing to overwrite {clash[0]} (use force)")

    summary, failures = [], 0
    for name, base in campaign.configs.items():
        for seed in campaign.seeds:
            cfg = base.with_overrides(run__seed=seed)
            try:
                hist = run(cfg)
                if on_history is not None:
                    on_history(name, seed, hist)
                cps = checkpoint_grid(hist.T, campaign.checkpoint_start)
                comp_bits, base_bits = _bits_rows(hist, cfg.compressor.q)
                table = checkpoint_table(hist, cps)
                rows = [(T, reg, ccv, int(comp_bits[T - 1]), int(base_bits[T - 1]), sr, sc)
                        for (T, reg, ccv, _, _, sr, sc) in table]
                write_history_csv(rows, os.path.join(campaign.out, f"{name}_seed{seed}.csv"))
                dict_rows = [dict(zip(CSV_COLUMNS, r)) for r in rows]
                sreg, sccv = fit_slopes(dict_rows) if rows else (math.nan, math.nan)
                last = rows[-1] if rows else (0, 0.0, 0.0, 0, 0, math.nan, math.nan)
                summary.append((name, seed, "ok", hist.T, last[1], last[2], int(hist.bits.sum()),
                                sreg, sccv, int(hist.overflow.sum())))
            except Exception as exc:  # noqa: BLE001 - recorded, campaign continues
                log.error("run %s seed %s failed: %s", name, seed, exc)
                failures += 1
                summary.append((name, seed, "error", 0, math.nan, math.nan, 0, math.nan, math.nan, 0))
    _write_summary(summary, os.path.join(campaign.out, campaign.summary))
    return summary, failures


def _write_summary(summary, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summary:
            w.writerow([row[0], row[1], row[2]] + [_fmt(v) for v in row[3:]])
        for name in dict.fromkeys(r[0] for r in summary):
            ok = [r for r in summary if r[0] == name and r[2] == "ok"]
            if not ok:
                continue
            vals = np.array([r[3:] for r in ok], dtype=float)
            for stat, fn in (("mean", np.mean), ("min", np.min), ("max", np.max)):
                w.writerow([name, stat, "ok"] + [repr(float(v)) for v in fn(vals, axis=0)])


def preset_paper_experiment(desk=False, T=None, seeds=(0, 1, 2), out="results"):
    """
    The localization comparison: compressed versus uncompressed, for both
    schedule families, plus a large-margin constraint variant.

    The full preset uses 100 sensors; the desk preset uses 10 (the chain
    segments rescale with ``n``) and otherwise differs only in ``T``.
    """
    n = 10 if desk else 100
    T = (DESK_T if desk else FULL_T) if T is None else T
    base = RunConfig().with_overrides(problem__n=n, problem__b=0.01, graph__rho=0.1,
                                      compressor__delta=1, compressor__q=8, run__T=T)
    mu = base.schedule.mu
    geo_alpha0 = base.schedule.alpha0 * math.sqrt((1 - mu) / mu)
    configs = {}
    for fam, extra in (("polynomial", {}), ("geometric", {"schedule__alpha0": geo_alpha0})):
        for kind in ("round", "none"):
            label = "compressed" if kind == "round" else "baseline"
            configs[f"{fam}-{label}"] = base.with_overrides(
                schedule__family=fam, compressor__kind=kind, **extra)
    configs["polynomial-compressed-margin"] = base.with_overrides(problem__b=0.5)
    return Campaign(configs=configs, seeds=tuple(seeds), out=out)
