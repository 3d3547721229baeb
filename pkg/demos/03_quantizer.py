"""
Lattice quantizers and their bit cost.

A message of p coordinates is sent as p signed q-bit integers k, standing for
the vector delta * k.  Deterministic rounding has a sup-norm error of at most
delta/2; the dithered variant is unbiased but can err by up to delta.

Run: python3 demos/03_quantizer.py
"""

import numpy as np

from dpdcc.compress import Compressor, bit_cost, compress, lattice_overflow, compressor_error

rng = np.random.default_rng(0)
for comp in (Compressor("round", delta=1), Compressor("round", delta=2), Compressor("dithered", delta=1)):
    err = compressor_error(comp, 100_000)
    print(f"{comp.kind:8s} delta={comp.delta}: squared error {err:.4f}, bound {comp.error_bound}")

y, msg = compress(Compressor("round"), np.array([0.6, -0.2]))
print("C(0.6, -0.2) =", y, "sent as", msg.coords, f"({msg.bits} bits)")

print("bits per 2-d message: quantized", bit_cost(Compressor("round", q=8), 2),
      "vs float", bit_cost(Compressor("identity"), 2))

# The q-bit range is an accounting convention; large values are flagged, not clipped.
k = Compressor("round").lattice(np.array([100.4, -300.0]))
print("lattice", k, "overflows 8 bits:", lattice_overflow(k, 8))
