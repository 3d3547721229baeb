"""
Running a small campaign through the command line interface.

A campaign file lists named configurations (dotted block.field keys) and the
seeds to run them with.  The runner writes one CSV per (configuration, seed)
and a summary with mean/min/max rows; ``slopes`` refits growth exponents.

Run: python3 demos/05_campaign_cli.py
"""

import os
import tempfile

from dpdcc.cli import main

CAMPAIGN = """
[campaign]
seeds = 0 1

[compressed]
problem.n = 6
run.T = 1024

[baseline]
problem.n = 6
run.T = 1024
compressor.kind = none

[coarse]
problem.n = 6
run.T = 1024
compressor.delta = 4
compressor.q = 4
"""

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "demo.ini")
    with open(path, "w") as fh:
        fh.write(CAMPAIGN)
    out = os.path.join(tmp, "results")
    status = main(["campaign", path, "--out", out])
    print("exit status", status)
    print(sorted(os.listdir(out)))
    with open(os.path.join(out, "summary.csv")) as fh:
        print(fh.read())
    main(["slopes", os.path.join(out, "compressed_seed0.csv"), os.path.join(out, "coarse_seed0.csv")])
