"""QUBO / Ising problem representation, conversions, energies and instance files.

Spin convention: ``s = 2 z - 1`` maps binary ``z in {0, 1}`` onto ``s in {-1, +1}``.
Couplings are stored once per unordered pair ``i < j`` but the Ising energy sums
over ordered pairs, so every stored bond contributes ``2 W_ij s_i s_j``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

__all__ = [
    "BinaryQubo",
    "QuboInstance",
    "SpinConfiguration",
    "ValidationError",
    "binary_loss",
    "energy",
    "fold_bias",
    "from_binary",
    "gen_ea3d",
    "gen_ea_lattice",
    "read_instance",
    "unfold_spins",
    "write_instance",
]


class ValidationError(ValueError):
    """Raised for malformed problems, spin vectors or instance files."""


@dataclass(frozen=True)
class BinaryQubo:
    """Binary problem ``min_z  z^T J z + b^T z`` over ``z in {0,1}^N``."""

    J: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] < 1:
            raise ValidationError(f"J must be a non-empty square matrix, got shape {J.shape}")
        if b.shape != (J.shape[0],):
            raise ValidationError(f"b must have shape ({J.shape[0]},), got {b.shape}")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(b))):
            raise ValidationError("J and b must be finite")
        if not np.array_equal(J, J.T):
            raise ValidationError("J must be symmetric")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.J.shape[0]


def binary_loss(q: BinaryQubo, z) -> float:
    z = np.asarray(z, dtype=float)
    return float(z @ q.J @ z + q.b @ z)


@dataclass(frozen=True)
class QuboInstance:
    """Ising problem ``sum_{i,j} W_ij s_i s_j + sum_i c_i s_i + offset``.

    The symmetric coupling matrix is held as a canonical edge list: ``rows[e] < cols[e]``,
    sorted lexicographically, one entry per unordered pair. ``adjacency`` gives the
    symmetric CSR view whose per-row neighbour indices are sorted.

    Parameters
    ----------
    n : int
        Number of spins.
    rows, cols : array of int
        Bond endpoints with ``rows < cols``.
    weights : array of float
        ``W_ij`` for each stored bond.
    c : array of float, optional
        Linear biases, zero by default.
    offset : float
        Constant energy term.
    meta : dict
        Free-form provenance (generator, seed, boundary). Not part of equality.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    c: np.ndarray | None = None
    offset: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValidationError("instance needs at least one spin")
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if not (rows.shape == cols.shape == w.shape):
            raise ValidationError("rows, cols and weights must have equal length")
        if rows.size and (rows.min() < 0 or cols.max() >= n):
            raise ValidationError("bond index out of range")
        if np.any(rows >= cols):
            raise ValidationError("bonds must satisfy i < j (no diagonal entries)")
        order = np.lexsort((cols, rows))
        rows, cols, w = rows[order], cols[order], w[order]
        if rows.size > 1 and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
            raise ValidationError("duplicate bond")
        c = np.zeros(n) if self.c is None else np.asarray(self.c, dtype=float).copy()
        if c.shape != (n,):
            raise ValidationError(f"c must have shape ({n},)")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(c)) and math.isfinite(self.offset)):
            raise ValidationError("non-finite coefficients")
        for arr in (rows, cols, w, c):
            arr.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "offset", float(self.offset))

    def __eq__(self, other):
        if not isinstance(other, QuboInstance):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.c, other.c)
            and self.offset == other.offset
        )

    __hash__ = None

    @classmethod
    def from_dense(cls, W, c=None, offset: float = 0.0, meta=None) -> QuboInstance:
        """Build from a dense symmetric matrix; the diagonal goes into ``offset``."""
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError("W must be square")
        if not np.all(np.isfinite(W)):
            raise ValidationError("non-finite coefficients")
        if not np.array_equal(W, W.T):
            raise ValidationError("W must be symmetric")
        diag = np.diag(W)
        if np.any(diag != 0):
            logger.warning("moving %d diagonal coupling(s) into the offset", np.count_nonzero(diag))
            offset = offset + float(diag.sum())
        i, j = np.nonzero(np.triu(W, k=1))
        return cls(W.shape[0], i, j, W[i, j], c, offset, dict(meta or {}))

    @property
    def nnz(self) -> int:
        """Number of stored unordered bonds."""
        return int(self.rows.size)

    @property
    def has_bias(self) -> bool:
        return bool(np.any(self.c != 0))

    @property
    def adjacency(self) -> sp.csr_matrix:
        r = np.concatenate([self.rows, self.cols])
        col = np.concatenate([self.cols, self.rows])
        w = np.concatenate([self.weights, self.weights])
        A = sp.csr_matrix((w, (r, col)), shape=(self.n, self.n))
        A.sort_indices()
        return A

    def neighbors(self, i: int) -> list[tuple[int, float]]:
        """Adjacency list of site ``i`` as ``(neighbour, weight)`` sorted by neighbour."""
        A = self.adjacency
        lo, hi = A.indptr[i], A.indptr[i + 1]
        return list(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()))

    def dense(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        W[self.rows, self.cols] = self.weights
        W[self.cols, self.rows] = self.weights
        return W


@dataclass(frozen=True)
class SpinConfiguration:
    s: np.ndarray
    energy: float

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.int8).copy()
        if not np.all(np.abs(s) == 1):
            raise ValidationError("spins must be exactly -1 or +1")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "energy", float(self.energy))

    def __eq__(self, other):
        if not isinstance(other, SpinConfiguration):
            return NotImplemented
        return self.energy == other.energy and np.array_equal(self.s, other.s)

    __hash__ = None

    @classmethod
    def of(cls, inst: QuboInstance, s) -> SpinConfiguration:
        return cls(s, energy(inst, s))


def _as_spins(inst: QuboInstance, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (inst.n,):
        raise ValidationError(f"expected {inst.n} spins, got shape {s.shape}")
    if not np.all(np.abs(s) == 1):
        raise ValidationError("spins must be +1 or -1")
    return s


def energy(inst: QuboInstance, s) -> float:
    """Ising energy, counting each stored bond twice (ordered pairs)."""
    s = _as_spins(inst, s)
    quad = 2.0 * np.dot(inst.weights, s[inst.rows] * s[inst.cols])
    return float(quad + inst.c @ s + inst.offset)


def from_binary(q: BinaryQubo) -> QuboInstance:
    """Map the binary problem onto spins with ``W = J/4`` and ``c = (b + J 1)/2``.

    The returned offset makes the two losses agree pointwise under ``s = 2z - 1``.
    """
    J = q.J
    W = J / 4.0
    c = (q.b + J.sum(axis=1)) / 2.0
    offset = J.sum() / 4.0 + q.b.sum() / 2.0
    return QuboInstance.from_dense(W, c, offset, meta={"source": "binary"})


def fold_bias(inst: QuboInstance) -> QuboInstance:
    """Absorb linear terms into couplings to an extra spin (index ``n``) fixed at +1."""
    n = inst.n
    idx = np.nonzero(inst.c)[0]
    rows = np.concatenate([inst.rows, idx])
    cols = np.concatenate([inst.cols, np.full(idx.size, n)])
    w = np.concatenate([inst.weights, inst.c[idx] / 2.0])
    meta = dict(inst.meta, folded=True)
    return QuboInstance(n + 1, rows, cols, w, None, inst.offset, meta)


def unfold_spins(s) -> np.ndarray:
    """Map a folded solution back: gauge the reference spin to +1, then drop it."""
    s = np.asarray(s)
    return (s[:-1] * s[-1]).astype(s.dtype)


def gen_ea_lattice(shape, seed: int, boundary: str = "periodic") -> QuboInstance:
    """Edwards-Anderson glass on an ``Lx x Ly x Lz`` lattice with N(0,1) bond couplings.

    Sites are numbered ``(x * Ly + y) * Lz + z``. Bonds are enumerated site by site,
    axis by axis (x, y, z), and each draws the next value of one PCG64 stream seeded
    from ``(seed, Lx, Ly, Lz, periodic)``; the instance is therefore stable across
    platforms. Periodic wrap-around bonds are added only along axes longer than 2,
    since for a side of 2 the wrap bond coincides with the open one.
    """
    shape = tuple(int(v) for v in shape)
    if len(shape) != 3 or min(shape) < 1:
        raise ValidationError(f"lattice shape must be three positive ints, got {shape}")
    if boundary not in ("open", "periodic"):
        raise ValidationError(f"boundary must be 'open' or 'periodic', got {boundary!r}")
    periodic = boundary == "periodic"
    dims = np.array(shape)
    n = int(np.prod(dims))
    coords = np.stack(np.unravel_index(np.arange(n), shape), axis=1)
    bonds = []
    for site in range(n):
        for axis in range(3):
            nb = coords[site].copy()
            nb[axis] += 1
            if nb[axis] == dims[axis]:
                if not (periodic and dims[axis] > 2):
                    continue
                nb[axis] = 0
            other = int(np.ravel_multi_index(tuple(nb), shape))
            bonds.append((site, other))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *shape, int(periodic)])))
    w = rng.standard_normal(len(bonds))
    pairs = np.array(bonds, dtype=np.int64).reshape(-1, 2)
    rows, cols = pairs.min(axis=1), pairs.max(axis=1)
    meta = {"generator": "ea3d", "shape": shape, "seed": int(seed), "boundary": boundary}
    return QuboInstance(n, rows, cols, w, None, 0.0, meta)


def gen_ea3d(L: int, seed: int, boundary: str = "periodic") -> QuboInstance:
    """Cubic ``L^3`` Edwards-Anderson instance (see ``gen_ea_lattice``)."""
    if int(L) < 2:
        raise ValidationError(f"lattice side must be >= 2, got {L}")
    return gen_ea_lattice((L, L, L), seed, boundary)


# --- instance files -------------------------------------------------------------

_FMT = "%.17g"


def write_instance(inst: QuboInstance, path, comment: str | None = None) -> None:
    """Write the line-oriented text format (header, ``c`` lines, ``w`` lines).

    ``comment`` is written first as ``# comment`` lines, which the reader ignores.
    """
    boundary = inst.meta.get("boundary", "none")
    lines = [f"# {ln}" for ln in comment.splitlines()] if comment else []
    lines += [f"qubo {inst.n} {inst.nnz} {boundary} {_FMT % inst.offset}"]
    for i in np.nonzero(inst.c)[0]:
        lines.append(f"c {i} {_FMT % inst.c[i]}")
    for i, j, w in zip(inst.rows.tolist(), inst.cols.tolist(), inst.weights.tolist()):
        lines.append(f"w {i} {j} {_FMT % w}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_instance(path) -> QuboInstance:
    """Parse an instance file; a pair given once is stored symmetrically."""
    n = None
    nnz = None
    boundary = "none"
    offset = 0.0
    c = None
    bonds: dict[tuple[int, int], float] = {}

    def fail(lineno, msg):
        raise ValidationError(f"{path}:{lineno}: {msg}")

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if n is None:
                if tok[0] != "qubo" or len(tok) != 5:
                    fail(lineno, "expected header 'qubo <N> <nnz> <boundary> <offset>'")
                try:
                    n, nnz, boundary, offset = int(tok[1]), int(tok[2]), tok[3], float(tok[4])
                except ValueError:
                    fail(lineno, "malformed header")
                if n < 1 or nnz < 0:
                    fail(lineno, "malformed header")
                c = np.zeros(n)
                continue
            try:
                if tok[0] == "c" and len(tok) == 3:
                    i, v = int(tok[1]), float(tok[2])
                    if not 0 <= i < n:
                        fail(lineno, f"index {i} out of range for N={n}")
                    c[i] = v
                elif tok[0] == "w" and len(tok) == 4:
                    i, j, v = int(tok[1]), int(tok[2]), float(tok[3])
                    if not (0 <= i < n and 0 <= j < n):
                        fail(lineno, f"index out of range for N={n}")
                    if i == j:
                        fail(lineno, "diagonal coupling")
                    key = (min(i, j), max(i, j))
                    if key in bonds and bonds[key] != v:
                        fail(lineno, f"asymmetric duplicate entry for pair {key}")
                    bonds[key] = v
                else:
                    fail(lineno, f"unrecognised line {line!r}")
            except ValueError as exc:
                if isinstance(exc, ValidationError):
                    raise
                fail(lineno, f"malformed number in {line!r}")
    if n is None:
        raise ValidationError(f"{path}: missing header")
    if len(bonds) != nnz:
        raise ValidationError(f"{path}: header declares {nnz} bonds, found {len(bonds)}")
    keys = sorted(bonds)
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    w = np.array([bonds[k] for k in keys], dtype=float)
    meta = {} if boundary == "none" else {"boundary": boundary}
    return QuboInstance(n, rows, cols, w, c, offset, meta)
