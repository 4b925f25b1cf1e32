"""Binary QUBO input: map to spins, fold the linear terms into an extra spin, solve, map back.

Run with ``python3 demos/03_binary_problems.py``.
"""

import itertools

import numpy as np

from gcsanneal.anneal import AnnealConfig, run
from gcsanneal.qubo import BinaryQubo, binary_loss, energy, fold_bias, from_binary, unfold_spins

rng = np.random.default_rng(3)
J = rng.normal(size=(6, 6))
J = (J + J.T) / 2
q = BinaryQubo(J, rng.normal(size=6))

ising = from_binary(q)
print("spin form has biases:", ising.has_bias, " offset:", round(ising.offset, 4))

# The annealer works on pure couplings; an auxiliary spin pinned at +1 carries the biases.
folded = fold_bias(ising)
print("folded problem:", folded.n, "spins, biases left:", folded.has_bias)

res = run(folded, AnnealConfig(n_t=500, seed=0))
s = unfold_spins(res.solution.s)
z = (s + 1) // 2
print("annealed z:", z, " loss:", round(binary_loss(q, z), 6), " spin energy:", round(energy(ising, s), 6))

best = min(itertools.product((0, 1), repeat=6), key=lambda zz: binary_loss(q, zz))
print("exhaustive z:", np.array(best), " loss:", round(binary_loss(q, best), 6))
