"""Dense 2^n reference simulator and exhaustive ground-state search.

Used as ground truth for the analytical engine. Qubit ``j`` is tensor axis ``j`` of the
``(2,)*n`` reshaped amplitude vector; basis state ``|0>`` has ``sigma_z = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .qubo import QuboInstance, SpinConfiguration, energy

__all__ = [
    "MAX_BRUTE_FORCE",
    "MAX_STATE_QUBITS",
    "DenseState",
    "ResourceError",
    "brute_force_min",
    "build_state",
    "expval",
    "hamiltonian_expval",
    "naive_min",
]

MAX_STATE_QUBITS = 22
MAX_BRUTE_FORCE = 25

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}
_HERMITIAN = set("IXYZ")


class ResourceError(RuntimeError):
    """Problem too large for dense simulation or enumeration."""


@dataclass(frozen=True)
class DenseState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n,):
            raise ValueError("amplitude vector has the wrong length")
        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalised (norm^2 = {norm})")
        self.amplitudes.setflags(write=False)


def _rotation(v) -> np.ndarray:
    """``exp(-i v . sigma)`` via a 2x2 matrix exponential."""
    gen = v[0] * PAULI["X"] + v[1] * PAULI["Y"] + v[2] * PAULI["Z"]
    return expm(-1j * gen)


def _apply_1q(psi: np.ndarray, op: np.ndarray, site: int, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [site])), 0, site)
    return t.reshape(-1)


def _basis_spins(n: int) -> np.ndarray:
    """``(2^n, n)`` array of sigma_z eigenvalues; row index = bit string, qubit 0 most significant."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return 1 - 2 * bits


def build_state(params) -> DenseState:
    """Construct ``U(y) V(M) U(x) |+>^n`` with ``V = exp(-i sum_{j!=k} M_jk Z_j Z_k)``."""
    n = params.n
    if n > MAX_STATE_QUBITS:
        raise ResourceError(f"dense states are capped at {MAX_STATE_QUBITS} qubits, got {n}")
    psi = np.full(2**n, 2 ** (-n / 2), dtype=complex)
    for j in range(n):
        psi = _apply_1q(psi, _rotation(params.x[j]), j, n)
    z = _basis_spins(n).astype(float)
    M = np.asarray(params.m, dtype=float)
    phase = np.einsum("bj,jk,bk->b", z, M - np.diag(np.diag(M)), z)
    psi = psi * np.exp(-1j * phase)
    for j in range(n):
        psi = _apply_1q(psi, _rotation(params.y[j]), j, n)
    return DenseState(n, psi)


def _parse_op(op) -> list[tuple[str, int]]:
    if isinstance(op, str):
        out = []
        for tok in op.split():
            label, site = tok[0], tok[1:]
            out.append((label, int(site)))
        return out
    return [(str(label), int(site)) for label, site in op]


def expval(state: DenseState, op):
    """Expectation value of a Pauli product.

    ``op`` is a string such as ``"Z0 Z2"`` or ``"+1 X3"`` or a sequence of
    ``(label, site)`` pairs with labels from ``I X Y Z + -``. Hermitian strings return
    a float, strings containing ``+``/``-`` return the complex value.
    """
    terms = _parse_op(op)
    phi = state.amplitudes
    hermitian = True
    for label, site in terms:
        if label not in PAULI:
            raise ValueError(f"unknown Pauli label {label!r}")
        if not 0 <= site < state.n:
            raise IndexError(f"site {site} out of range for {state.n} qubits")
        hermitian &= label in _HERMITIAN
        phi = _apply_1q(phi, PAULI[label], site, state.n)
    val = np.vdot(state.amplitudes, phi)
    return float(val.real) if hermitian else complex(val)


def hamiltonian_expval(state: DenseState, inst: QuboInstance, s: float) -> float:
    """``<s H_I + (1 - s) H_TF>`` computed densely, ``H_TF = -sum_i X_i``."""
    if state.n != inst.n:
        raise ValueError("state and instance sizes differ")
    probs = np.abs(state.amplitudes) ** 2
    spins = _basis_spins(inst.n).astype(float)
    diag = 2.0 * np.sum(inst.weights * spins[:, inst.rows] * spins[:, inst.cols], axis=1)
    diag += spins @ inst.c + inst.offset
    ising = float(probs @ diag)
    tf = -sum(expval(state, [("X", i)]) for i in range(inst.n))
    return s * ising + (1.0 - s) * tf


# --- exhaustive search ----------------------------------------------------------


def _tolerance(inst: QuboInstance) -> float:
    scale = 1.0 + 2.0 * np.abs(inst.weights).sum() + np.abs(inst.c).sum() + abs(inst.offset)
    return 1e-9 * scale


def _batch_energy(inst: QuboInstance, S: np.ndarray) -> np.ndarray:
    S = S.astype(float)
    quad = 2.0 * (S[:, inst.rows] * S[:, inst.cols]) @ inst.weights
    return quad + S @ inst.c + inst.offset


class _Best:
    """Running minimum over candidate blocks, ranked by (energy, bits) with +1 -> bit 0.

    Candidates arrive pre-filtered by the fast (incremental) energies; here they are
    re-evaluated from scratch so both enumerators rank identical values.
    """

    def __init__(self, inst: QuboInstance):
        self.inst = inst
        self.value = np.inf
        self.key: tuple = ()
        self.s: np.ndarray | None = None

    def update(self, block: np.ndarray):
        if block.size == 0:
            return
        e = _batch_energy(self.inst, block)
        m = e.min()
        ties = block[e == m]
        bits = (1 - ties.astype(np.int64)) // 2
        first = ties[np.lexsort(bits.T[::-1])[0]]
        key = tuple(((1 - first.astype(np.int64)) // 2).tolist())
        if m < self.value or (m == self.value and key < self.key):
            self.value, self.key, self.s = m, key, first.copy()

    def result(self) -> tuple[float, SpinConfiguration]:
        best = SpinConfiguration.of(self.inst, self.s)
        return best.energy, best


def _check_size(inst: QuboInstance):
    if inst.n > MAX_BRUTE_FORCE:
        raise ResourceError(f"exhaustive search is capped at N={MAX_BRUTE_FORCE}, got {inst.n}")


def brute_force_min(inst: QuboInstance, block_bits: int = 14) -> tuple[float, SpinConfiguration]:
    """Exact minimum by Gray-code enumeration with single-flip energy updates.

    The last ``k`` spins are enumerated as one vectorised block; the remaining spins
    walk a Gray code, so each step flips one spin and updates all ``2^k`` block energies
    from precomputed local fields. Returns ``(E0, s*)``; among degenerate minima the
    lexicographically smallest configuration (reading +1 before -1) is chosen.
    """
    _check_size(inst)
    n = inst.n
    k = min(n, block_bits)
    hi = n - k
    W = inst.dense()
    c = inst.c
    S_lo = _basis_spins(k).astype(float)
    s_hi = np.ones(hi)
    S = np.empty((2**k, n))
    S[:, :hi] = 1.0
    S[:, hi:] = S_lo
    # local field on hi spin b: block part F_lo[:, b] plus hi part field_hi[b]
    F_lo = S_lo @ W[hi:, :hi]
    field_hi = W[:hi, :hi] @ s_hi
    E = np.einsum("bi,ij,bj->b", S, W, S) + S @ c + inst.offset

    tol = _tolerance(inst)
    best_val = E.min()
    tracker = _Best(inst)
    tracker.update(S[E <= best_val + tol].astype(np.int8))

    block = np.empty((2**k, n), dtype=np.int8)
    block[:, hi:] = S_lo
    for step in range(1, 2**hi):
        b = hi - (step & -step).bit_length()
        sb = s_hi[b]
        E -= 2.0 * sb * (2.0 * (F_lo[:, b] + field_hi[b]) + c[b])
        s_hi[b] = -sb
        field_hi -= 2.0 * sb * W[:hi, b]
        m = E.min()
        if m <= best_val + tol:
            best_val = min(best_val, m)
            rows = E <= best_val + tol
            block[:, :hi] = s_hi
            tracker.update(block[rows])
    return tracker.result()


def naive_min(inst: QuboInstance, chunk_bits: int = 16) -> tuple[float, SpinConfiguration]:
    """Reference enumerator: evaluates every configuration from scratch with dense algebra."""
    _check_size(inst)
    n = inst.n
    W = inst.dense()
    tol = _tolerance(inst)
    total = 2**n
    chunk = min(total, 2**chunk_bits)
    shifts = np.arange(n - 1, -1, -1)
    best_val = np.inf
    tracker = _Best(inst)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        S = (1 - 2 * ((idx[:, None] >> shifts) & 1)).astype(float)
        E = np.sum((S @ W) * S, axis=1) + S @ inst.c + inst.offset
        m = E.min()
        if m <= best_val + tol:
            best_val = min(best_val, m)
            tracker.update(S[E <= best_val + tol].astype(np.int8))
    return tracker.result()
