"""
Time-varying communication graphs and their mixing matrices.

Every round draws an Erdos-Renyi graph with edge probability rho and adds one
quarter of a chain 0-1-...-(n-1); any four consecutive rounds therefore form
a connected union.  Weights are 1/n per edge with the remainder on the
diagonal, so every mixing matrix is doubly stochastic and products of them
contract towards uniform averaging.

Run: python3 demos/02_time_varying_graph.py
"""

from dpdcc.graph import RandomRingTopology, check_b_connectivity, consensus_decay_check

topo = RandomRingTopology(n=10, rho=0.1, seed=0, B=4)
for t in range(1, 6):
    g = topo.graph(t)
    print(f"round {t}: {g.edge_count:2d} directed edges, e.g. {g.edges[:4]}")

W = topo.mixing(1).W
print("row sums", W.sum(axis=1).round(15))
print("column sums", W.sum(axis=0).round(15))

print("4-round windows connected:", all(check_b_connectivity([topo.graph(s + k) for k in range(4)])
                                        for s in range(1, 200)))
print("single rounds connected:  ", sum(check_b_connectivity([topo.graph(s)]) for s in range(1, 200)), "of 199")

consts = topo.constants
print(f"envelope: tau={consts.tau:.6f}, lambda={consts.lam:.8f}")
for length in (0, 20, 80, 400):
    dev = consensus_decay_check([topo.mixing(t) for t in range(1, length + 2)])
    print(f"  product of {length + 1:3d} matrices: deviation {dev:.3e}, bound {consts.bound(length):.3f}")

# The envelope is valid but loose: products reach machine precision long
# before the bound drops below one.
