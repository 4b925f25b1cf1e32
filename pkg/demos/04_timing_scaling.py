"""Per-iteration cost of the analytic gradient on cubic lattices, with a power-law fit.

Run with ``python3 demos/04_timing_scaling.py`` (about a minute). Times are machine-specific;
the fitted exponents are the interesting part.
"""

from gcsanneal.anneal import AnnealConfig
from gcsanneal.bench import fit_scaling, time_per_iteration
from gcsanneal.qubo import gen_ea3d

sides = [3, 4, 5, 6, 7, 8]
ns = [L**3 for L in sides]

# Dense M couples every pair, so every expectation value is a product over N-1 factors.
dense = [time_per_iteration(gen_ea3d(L, L), AnnealConfig(), iterations=3) for L in sides]
# Bond-structured M keeps only lattice neighbours: products shrink to a handful of factors.
sparse = [time_per_iteration(gen_ea3d(L, L), AnnealConfig(sparse_m=True), iterations=3) for L in sides]

print(f"{'N':>6}{'dense M [ms]':>16}{'sparse M [ms]':>16}")
for n, a, b in zip(ns, dense, sparse):
    print(f"{n:>6}{a * 1e3:>16.2f}{b * 1e3:>16.2f}")

for label, ts in (("dense M", dense), ("sparse M", sparse)):
    fit = fit_scaling(ns, ts)
    print(f"{label:<9} time ~ N^{fit.exponent:.2f} (bootstrap s.e. {fit.stderr:.2f})")
