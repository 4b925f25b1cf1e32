"""A tour of the variational state: analytic expectation values next to a brute-force simulator.

Run with ``python3 demos/01_coherent_state_basics.py``.
"""

import numpy as np

from gcsanneal.gcs import GcsParams, classical_params, expval_sx, expval_zz, loss
from gcsanneal.qubo import energy, gen_ea3d
from gcsanneal.statevector import build_state, expval

rng = np.random.default_rng(1)

# Five spins with random local rotations and a dense entangling matrix M.
# The analytic engine never forms the 2^5 amplitudes; the simulator does.
p = GcsParams.random(5, rng, scale=0.7)
print("parameters:", p.num_params, "(6n + n(n-1)/2)")

state = build_state(p)
for i in range(3):
    print(f"<X{i}>   analytic {expval_sx(p, i):+.12f}   dense {expval(state, [('X', i)]):+.12f}")
print(f"<Z0 Z4> analytic {expval_zz(p, 0, 4):+.12f}   dense {expval(state, [('Z', 0), ('Z', 4)]):+.12f}")

# A computational basis state is also a member of the family: rotate each |+> about y.
inst = gen_ea3d(2, seed=4)
s = rng.choice([-1, 1], inst.n)
print("\nclassical embedding")
print("  energy(s)          ", energy(inst, s))
print("  loss at s=1        ", loss(classical_params(s), 1.0, inst))

# At the start of the schedule the loss is the transverse-field energy, -N for |+>^N.
print("  loss of |+>^N at 0 ", loss(GcsParams.zeros(inst.n), 0.0, inst))
