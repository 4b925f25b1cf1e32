"""Self-checks: analytical expectations against the dense simulator, gradients against finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gcs
from .qubo import QuboInstance
from .statevector import MAX_STATE_QUBITS, ResourceError, build_state, expval, hamiltonian_expval

__all__ = ["Check", "VerificationReport", "fd_gradient", "random_instance", "run_verification"]


@dataclass
class Check:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)


@dataclass
class VerificationReport:
    n: int
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [
            f"check={c.name} max_error={c.max_error:.3e} tolerance={c.tolerance:.1e} "
            f"status={'pass' if c.passed else 'fail'}"
            for c in self.checks
        ]


def random_instance(n: int, rng: np.random.Generator, density: float = 0.6) -> QuboInstance:
    """Random Gaussian couplings on a random edge subset (no biases)."""
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < density
    return QuboInstance(n, iu[keep], ju[keep], rng.standard_normal(int(keep.sum())), offset=float(rng.normal()))


def fd_gradient(params: gcs.GcsParams, s: float, inst: QuboInstance, h: float = 1e-5):
    """Central differences of the loss in every free parameter; ``M`` moves symmetrically."""
    def f(p):
        return gcs.loss(p, s, inst)

    gx = np.zeros_like(params.x)
    gy = np.zeros_like(params.y)
    gm = np.zeros_like(params.m)
    for name, g in (("x", gx), ("y", gy)):
        base = getattr(params, name)
        for idx in np.ndindex(base.shape):
            hi, lo = base.copy(), base.copy()
            hi[idx] += h
            lo[idx] -= h
            g[idx] = (f(_replace(params, name, hi)) - f(_replace(params, name, lo))) / (2 * h)
    for i, j in zip(*np.triu_indices(params.n, 1)):
        hi, lo = params.m.copy(), params.m.copy()
        hi[i, j] += h
        hi[j, i] += h
        lo[i, j] -= h
        lo[j, i] -= h
        gm[i, j] = gm[j, i] = (f(_replace(params, "m", hi)) - f(_replace(params, "m", lo))) / (2 * h)
    return gx, gm, gy


def _replace(params, name, value):
    blocks = {"x": params.x, "m": params.m, "y": params.y}
    blocks[name] = value
    return gcs.GcsParams(params.n, blocks["x"], blocks["m"], blocks["y"])


def _scaled_error(a, b, rel: float, abs_: float) -> float:
    """Largest ``|a - b| / (abs_ + rel |b|)``; at most 1 means within tolerance."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / (abs_ + rel * np.abs(b)), initial=0.0))


def run_verification(n: int, trials: int = 5, seed: int = 0, scale: float = 1.0) -> VerificationReport:
    """Compare the analytical engine with the dense oracle and with finite differences at size ``n``."""
    if n > MAX_STATE_QUBITS:
        raise ResourceError(f"verification uses dense states, capped at {MAX_STATE_QUBITS} qubits; got n={n}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    err = {"sx": 0.0, "z": 0.0, "zz": 0.0, "loss": 0.0, "gradient": 0.0}
    for _ in range(trials):
        p = gcs.GcsParams.random(n, rng, scale)
        st = build_state(p)
        for i in range(n):
            err["sx"] = max(err["sx"], abs(gcs.expval_sx(p, i) - expval(st, [("X", i)])))
            err["z"] = max(err["z"], abs(gcs.expval_z(p, i) - expval(st, [("Z", i)])))
            for j in range(i + 1, n):
                err["zz"] = max(err["zz"], abs(gcs.expval_zz(p, i, j) - expval(st, [("Z", i), ("Z", j)])))
        inst = random_instance(n, rng)
        s = float(rng.random())
        err["loss"] = max(err["loss"], abs(gcs.loss(p, s, inst) - hamiltonian_expval(st, inst, s)))
        if n <= 8:
            analytic = gcs.gradient(p, s, inst)
            numeric = fd_gradient(p, s, inst)
            for a, b in zip(analytic, numeric):
                err["gradient"] = max(err["gradient"], _scaled_error(a, b, 1e-6, 1e-9))
    report = VerificationReport(n)
    for name in ("sx", "z", "zz", "loss"):
        report.checks.append(Check(f"oracle_{name}", err[name], 1e-10))
    if n <= 8:
        # scaled error: 1 means exactly at the 1e-6 relative / 1e-9 absolute bound
        report.checks.append(Check("gradient_fd", err["gradient"], 1.0))
    return report
