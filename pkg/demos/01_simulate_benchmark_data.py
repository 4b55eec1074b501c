"""Draw benchmark tables from random structural equation models.

Each column is generated from its parents in a random DAG plus fresh noise,
so the ground-truth dependency structure is known exactly. That makes these
tables the right testbed for dependency-selection experiments: after training
you can score recovered edges against the real ones.
"""

import numpy as np

from dpsynth import semdata

# An Erdos-Renyi DAG: every upper-triangular pair becomes an edge with the
# same probability, tuned here to give about 10 edges over 10 nodes.
er = semdata.sample_er_dag(d=10, expected_edges=10, seed=7)
print(f"ER graph: {er.d} nodes, {len(er.edges)} edges")
print("  edges:", sorted(er.edges))

# A scale-free DAG: nodes arrive one at a time and attach preferentially to
# well-connected predecessors, so a few hubs collect most of the edges.
sf = semdata.sample_sf_dag(d=10, attach_m=2, seed=7)
degree = np.zeros(sf.d, dtype=int)
for parent, _child in sf.edges:
    degree[parent] += 1
print(f"SF graph: {len(sf.edges)} edges, max out-degree {degree.max()}")

# Linear mechanism: each column is a weighted sum of its parents plus noise.
spec = semdata.SemSpec(kind="linear")
weights = semdata.sample_weights(er, spec, seed=7)
table = semdata.simulate(er, weights, spec, n=2000, seed=7)
print(f"\nlinear table: {table.n} rows x {table.d} cols, names {table.names[:4]}...")
print("first row:", np.round(table.values[0], 3))

# Nonlinear mechanism: parents pass through a random smooth function instead.
nl_spec = semdata.SemSpec(kind="nonlinear")
nl_weights = semdata.sample_weights(er, nl_spec, seed=7)
nl_table = semdata.simulate(er, nl_weights, nl_spec, n=2000, seed=7)
print("nonlinear first row:", np.round(nl_table.values[0], 3))

# The ancestor closure of a node bounds how much of the table can influence
# it; the largest closure size governs how hard sequential modeling gets.
sizes = [len(semdata.ancestor_closure(er, j)) for j in range(er.d)]
print(f"\nancestor closure sizes: {sizes} (max {semdata.max_ancestor_size(er)})")
