"""Single-spin Metropolis simulated annealing on the Ising form."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .qubo import QuboInstance, SpinConfiguration, energy

__all__ = ["SaConfig", "SaResult", "sa_run", "simulated_annealing"]


@dataclass(frozen=True)
class SaConfig:
    """One sweep is ``n`` Metropolis proposals, one per site in a fresh random order."""

    sweeps: int = 1000
    beta_start: float = 0.1
    beta_end: float = 5.0
    schedule: str = "geometric"
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if not 0 < self.beta_start <= self.beta_end:
            raise ValueError("need 0 < beta_start <= beta_end")
        if self.schedule not in ("geometric", "linear"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def betas(self) -> np.ndarray:
        if self.sweeps == 1:
            return np.array([self.beta_end])
        if self.schedule == "geometric":
            return np.geomspace(self.beta_start, self.beta_end, self.sweeps)
        return np.linspace(self.beta_start, self.beta_end, self.sweeps)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SaResult:
    solution: SpinConfiguration
    final: np.ndarray
    tracked_energy: float
    accepted_deltas: np.ndarray
    sweep_times: np.ndarray


def sa_run(inst: QuboInstance, config: SaConfig) -> SaResult:
    """Anneal from a random start; the best configuration seen is returned as ``solution``."""
    n = inst.n
    rng = np.random.default_rng(config.seed)
    s = rng.choice(np.array([-1, 1]), size=n).tolist()
    A = inst.adjacency
    nbrs = [
        list(zip(A.indices[A.indptr[i] : A.indptr[i + 1]].tolist(), A.data[A.indptr[i] : A.indptr[i + 1]].tolist()))
        for i in range(n)
    ]
    c = inst.c.tolist()
    field = [sum(w * s[j] for j, w in nbrs[i]) for i in range(n)]
    e = energy(inst, s)
    best_e, best_s = e, list(s)
    accepted = []
    times = np.empty(config.sweeps)
    for k, beta in enumerate(config.betas()):
        t = time.perf_counter()
        order = rng.permutation(n).tolist()
        u = rng.random(n).tolist()
        for i, r in zip(order, u):
            si = s[i]
            delta = -2.0 * si * (2.0 * field[i] + c[i])
            if delta <= 0.0 or r < math.exp(-beta * delta):
                s[i] = -si
                for j, w in nbrs[i]:
                    field[j] -= 2.0 * w * si
                e += delta
                accepted.append(delta)
                if e < best_e:
                    best_e, best_s = e, list(s)
        times[k] = time.perf_counter() - t
    return SaResult(
        SpinConfiguration.of(inst, best_s), np.array(s, dtype=np.int8), e, np.array(accepted), times
    )


def simulated_annealing(inst: QuboInstance, config: SaConfig) -> SpinConfiguration:
    return sa_run(inst, config).solution
