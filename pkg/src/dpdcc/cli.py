"""
Command line entry point.

::

    dpdcc run config.ini [--seed 3] [--out results] [--trace]
    dpdcc campaign campaign.ini [--force]
    dpdcc preset paper [--desk]
    dpdcc verify
    dpdcc slopes results/*.csv

Exit status is 0 only when every run and every checked property passes.
"""

import argparse
import logging
import math
import os
import sys

from dpdcc import checks
from dpdcc.campaign import (
    Campaign,
    fit_slopes,
    preset_paper_experiment,
    read_history_csv,
    run_campaign,
)
from dpdcc.compress import CompressedMessage, write_messages
from dpdcc.config import RunConfig
from dpdcc.graph import GraphRound, write_edge_trace

__all__ = ["main", "build_parser"]

log = logging.getLogger("dpdcc")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, action="append",
                        help="seed override; repeat for several seeds")
    common.add_argument("--out", help="output directory")
    common.add_argument("--trace", action="store_true", help="also write edge and message traces")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")

    parser = argparse.ArgumentParser(prog="dpdcc", description=__doc__.splitlines()[1])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", parents=[common], help="run a single configuration")
    p.add_argument("config")
    p = sub.add_parser("campaign", parents=[common], help="run a campaign file")
    p.add_argument("campaign")
    p = sub.add_parser("preset", parents=[common], help="run a built-in campaign")
    p.add_argument("name", choices=["paper"], help="the reference localization comparison")
    p.add_argument("--desk", action="store_true", help="10 agents instead of 100")
    p.add_argument("--T", type=int, help="override the horizon")
    p = sub.add_parser("verify", parents=[common], help="run the property checks")
    p = sub.add_parser("slopes", parents=[common], help="fit growth slopes to history CSVs")
    p.add_argument("csv", nargs="+")
    return parser


def _report(summary, failures):
    for row in summary:
        name, seed, status = row[:3]
        if status != "ok":
            print(f"FAIL {name} seed={seed}")
            continue
        T, reg, ccv, bits, sreg, sccv, ovf = row[3:]
        print(f"ok   {name} seed={seed} T={T} NetReg={reg:.6g} NetCCV={ccv:.6g} bits={bits} "
              f"slope_reg={sreg:.3f} slope_ccv={sccv:.3f} overflow={ovf}")
    return 1 if failures else 0


def _write_traces(hist, out, stem, force):
    """Edge trace and per-round message file for a traced run."""
    paths = [os.path.join(out, f"{stem}_edges.txt"), os.path.join(out, f"{stem}_messages.txt")]
    if not force and any(os.path.exists(p) for p in paths):
        raise FileExistsError(f"refusing to overwrite traces in {out} (use --force)")
    adj = hist.trace["adjacency"]
    graphs = [GraphRound(t + 1, adj[t]) for t in range(len(adj))]
    write_edge_trace(graphs, paths[0])
    cfg = hist.config or {}
    comp = cfg.get("compressor", {})
    quantized = comp.get("kind") in ("round", "dithered")
    delta = comp.get("delta", 1) if quantized else 0
    bits = comp.get("q", 8) * hist.p if quantized else 64 * hist.p
    msgs = []
    payload = hist.trace["payload"]
    for t in range(len(payload)):
        for j in range(hist.n):
            coords = payload[t, j].astype(int) if quantized else payload[t, j]
            msgs.append((t + 1, j, CompressedMessage(tuple(coords.tolist()), delta, bits)))
    write_messages(msgs, paths[1])
    return paths


def cmd_run(args):
    cfg = RunConfig.from_file(args.config)
    if args.trace:
        cfg = cfg.with_overrides(run__trace=True)
    stem = os.path.splitext(os.path.basename(args.config))[0]
    camp = Campaign(configs={stem: cfg}, seeds=tuple(args.seed or [cfg.run.seed]),
                    out=args.out or "results", summary=f"{stem}_summary.csv")

    def traces(name, seed, hist):
        if cfg.run.trace:
            for p in _write_traces(hist, camp.out, f"{name}_seed{seed}", args.force):
                print(f"wrote {p}")

    return _report(*run_campaign(camp, force=args.force, on_history=traces))


def cmd_campaign(args):
    camp = Campaign.from_file(args.campaign)
    if args.seed:
        camp.seeds = tuple(args.seed)
    if args.out:
        camp.out = args.out
    return _report(*run_campaign(camp, force=args.force))


def cmd_preset(args):
    camp = preset_paper_experiment(desk=args.desk, T=args.T,
                                   seeds=tuple(args.seed) if args.seed else (0, 1, 2),
                                   out=args.out or ("results-desk" if args.desk else "results"))
    return _report(*run_campaign(camp, force=args.force))


def cmd_verify(args):
    seed = args.seed[0] if args.seed else 0
    results = checks.run_all(seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_slopes(args):
    code = 0
    for path in args.csv:
        rows = read_history_csv(path)
        sreg, sccv = fit_slopes(rows) if rows else (math.nan, math.nan)
        if math.isnan(sreg) or math.isnan(sccv):
            code = 1
        print(f"{path}: slope_reg={sreg:.4f} slope_ccv={sccv:.4f} checkpoints={len(rows)}")
    return code


COMMANDS = {
    "run": cmd_run,
    "campaign": cmd_campaign,
    "preset": cmd_preset,
    "verify": cmd_verify,
    "slopes": cmd_slopes,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
