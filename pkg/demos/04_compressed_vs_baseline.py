"""
Compressed versus full-precision communication on the desk-scale benchmark.

Both runs share the instance and every graph (same seed).  The compressed
algorithm sends 8-bit lattice messages of the scaled difference between an
agent's iterate and its public estimate; the baseline sends 64-bit floats.

Run: python3 demos/04_compressed_vs_baseline.py   (about 10 seconds)
"""

from dpdcc.campaign import preset_paper_experiment
from dpdcc.engine import run
from dpdcc.metrics import checkpoint_table

camp = preset_paper_experiment(desk=True)
rows = {}
for name in ("polynomial-compressed", "polynomial-baseline"):
    hist = run(camp.configs[name].with_overrides(run__seed=0))
    rows[name] = checkpoint_table(hist)
    print(f"{name}: infeasible states {hist.infeasible}, lattice overflows {int(hist.overflow.sum())}")

print(f"\n{'T':>5} {'NetReg comp':>12} {'NetReg base':>12} {'NetCCV comp':>12} {'NetCCV base':>12} {'bits comp':>10} {'bits base':>10}")
for c, b in zip(rows["polynomial-compressed"], rows["polynomial-baseline"]):
    print(f"{c[0]:5d} {c[1]:12.4g} {b[1]:12.4g} {c[2]:12.2f} {b[2]:12.2f} {c[3]:10d} {b[3]:10d}")

c, b = rows["polynomial-compressed"][-1], rows["polynomial-baseline"][-1]
print(f"\nbits ratio {c[3] / b[3]}; regret ratio {c[1] / b[1]:.3f}; violation ratio {c[2] / b[2]:.3f}")
print(f"growth slopes (all checkpoints): regret {c[5]:.2f}, violation {c[6]:.2f}")
