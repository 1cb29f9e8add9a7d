"""Sequence counts on the hand-built transmission graph."""

from lossychain import worked_example, xgraph

g = worked_example.graph()
j = worked_example.ANCHOR
print("FRSH from b_j:", xgraph.frsh_sequence(g, j).members)
print("BRSH from b_j:", xgraph.brsh_sequence(g, j).members)
for k, v in worked_example.values(g).items():
    print(f"{k:10s} {v}  (expected {worked_example.EXPECTED[k]})")
