"""Analytical expectation values and gradients for generalized coherent states.

The variational state is ``U(y) V(M) U(x) |+>^N`` with single-spin rotations
``U(x) = prod_j exp(-i x_j . sigma_j)`` and the diagonal entangler
``V(M) = exp(-i sum_{j != k} M_jk Z_j Z_k)``. Every Pauli expectation needed for the
annealing loss reduces to a sum of products of single-spin matrix elements:

* ``U(y)^dag sigma_r U(y) = sum_k c_rk sigma_k = sum_a d_ra sigma_a`` with
  ``a`` in ``(sigma_-, sigma_z, sigma_+)`` and ``d = c A``;
* ``V^dag sigma_a^(i) V = exp(+4 i a sum_k M_ik Z_k) sigma_a^(i)`` for
  ``sigma_+ = (X + iY)/2``.

Terms with ``a = -1`` are complex conjugates of ``a = +1`` terms, so the kernels only
form the ``+1`` products and take twice the real part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qubo import QuboInstance

__all__ = [
    "BASIS_CHANGE",
    "ConjugationCoeffs",
    "GcsParams",
    "NumericalError",
    "TermCache",
    "TermPlan",
    "build_plan",
    "classical_params",
    "conjugation_coeffs",
    "expectations",
    "expval_sx",
    "expval_z",
    "expval_zz",
    "gradient",
    "loss",
    "loss_plan",
    "single_spin_state",
    "sx_term_cache",
]

# rows: source Pauli x, y, z; columns: sigma_-, sigma_z, sigma_+
BASIS_CHANGE = np.array([[1, 0, 1], [1j, 0, -1j], [0, 1, 0]], dtype=complex)
KAPPA = 4.0
SERIES_CUTOFF = 1e-2
_PLUS = np.full(2, 1 / math.sqrt(2), dtype=complex)
_SIGMA = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)
_ROWS = {"x": 0, "y": 1, "z": 2}


class NumericalError(ArithmeticError):
    """A non-finite value appeared during evaluation."""


@dataclass(frozen=True)
class GcsParams:
    """Variational parameters: rotations ``x`` and ``y`` (``n x 3``), couplings ``m`` (``n x n``).

    ``m`` must be symmetric with zero diagonal.
    """

    n: int
    x: np.ndarray
    m: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        x = np.array(self.x, dtype=float)
        m = np.array(self.m, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.shape != (n, 3) or y.shape != (n, 3) or m.shape != (n, n):
            raise ValueError(f"parameter shapes {x.shape}, {m.shape}, {y.shape} do not match n={n}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m)) and np.all(np.isfinite(y))):
            raise ValueError("parameters must be finite")
        if not np.array_equal(m, m.T):
            raise ValueError("m must be symmetric")
        if np.any(np.diag(m) != 0):
            raise ValueError("m must have a zero diagonal")
        for a in (x, m, y):
            a.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "y", y)

    @classmethod
    def zeros(cls, n: int) -> GcsParams:
        return cls(n, np.zeros((n, 3)), np.zeros((n, n)), np.zeros((n, 3)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> GcsParams:
        m = np.triu(rng.normal(scale=scale, size=(n, n)), k=1)
        return cls(n, rng.normal(scale=scale, size=(n, 3)), m + m.T, rng.normal(scale=scale, size=(n, 3)))

    @property
    def num_params(self) -> int:
        return 6 * self.n + self.n * (self.n - 1) // 2


def classical_params(s) -> GcsParams:
    """Parameters whose state is the computational basis state with spins ``s``.

    ``exp(-i theta Y)`` with ``theta = -s pi/4`` turns ``|+>`` into ``|0>`` (s=+1) or ``|1>`` (s=-1).
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    x = np.zeros((n, 3))
    x[:, 1] = -s * np.pi / 4
    return GcsParams(n, x, np.zeros((n, n)), np.zeros((n, 3)))


# --- single-spin building blocks -----------------------------------------------


def _sinc_terms(r):
    """``sin r / r`` and ``(d/dr)(sin r / r) / r`` with a series branch near zero."""
    r = np.asarray(r, dtype=float)
    small = r < SERIES_CUTOFF
    rs = np.where(small, 1.0, r)
    r2 = r * r
    sinc = np.where(small, 1 - r2 / 6 + r2**2 / 120 - r2**3 / 5040, np.sin(rs) / rs)
    dsinc = np.where(
        small,
        -1 / 3 + r2 / 30 - r2**2 / 840 + r2**3 / 45360,
        (rs * np.cos(rs) - np.sin(rs)) / rs**3,
    )
    return sinc, dsinc


def _spin_states(x: np.ndarray):
    """States ``exp(-i x_j . sigma)|+>`` and their derivatives, shapes ``(n, 2)`` and ``(n, 3, 2)``."""
    x = np.atleast_2d(x)
    r = np.linalg.norm(x, axis=1)
    sinc, dsinc = _sinc_terms(r)
    cos = np.cos(r)
    xs = np.einsum("na,abc->nbc", x, _SIGMA)  # x . sigma
    xs_plus = xs @ _PLUS
    psi = cos[:, None] * _PLUS - 1j * sinc[:, None] * xs_plus
    # d/dx_m: -sinc x_m |+> - i (dsinc x_m (x.sigma) + sinc sigma_m) |+>
    sig_plus = _SIGMA @ _PLUS  # (3, 2)
    dpsi = (
        -(sinc[:, None] * x)[:, :, None] * _PLUS
        - 1j * (dsinc[:, None] * x)[:, :, None] * xs_plus[:, None, :]
        - 1j * sinc[:, None, None] * sig_plus[None, :, :]
    )
    return psi, dpsi


def single_spin_state(xj) -> np.ndarray:
    """``exp(-i x_j . sigma)|+>`` as amplitudes in the sigma_z basis (``|0>`` has Z = +1)."""
    return _spin_states(np.asarray(xj, dtype=float)[None, :])[0][0]


def _bloch(x: np.ndarray):
    """Bloch vectors ``<sigma_a>`` of ``exp(-i x_j . sigma)|+>`` and the Jacobian ``d<sigma_a>/dx_m``.

    ``<+|U^dag sigma_a U|+>`` is column 0 of the rotation matrix of ``U``, so the
    reference state maps exactly onto ``(1, 0, 0)``.
    """
    c, dc = _rotation_coeffs(x)
    return c[:, :, 0], np.swapaxes(dc[:, :, :, 0], 1, 2)


@dataclass(frozen=True)
class ConjugationCoeffs:
    """``c``: real rotation with ``U(y)^dag sigma_r U(y) = sum_k c_rk sigma_k``; ``d = c A``."""

    c: np.ndarray
    d: np.ndarray


def _levi_civita_dot(v: np.ndarray) -> np.ndarray:
    """``K[..., j, k] = eps_jkl v[..., l]``."""
    K = np.zeros(v.shape[:-1] + (3, 3))
    K[..., 0, 1], K[..., 1, 0] = v[..., 2], -v[..., 2]
    K[..., 1, 2], K[..., 2, 1] = v[..., 0], -v[..., 0]
    K[..., 2, 0], K[..., 0, 2] = v[..., 1], -v[..., 1]
    return K


def _rotation_coeffs(y: np.ndarray):
    """Rodrigues form ``c = cos(2r) I - f1 K(y) + f2 y y^T`` and ``dc/dy_m``.

    ``f1 = sin(2r)/r`` and ``f2 = (1 - cos 2r)/r^2``; returns ``c`` of shape ``(n, 3, 3)``
    and ``dc`` of shape ``(n, 3, 3, 3)`` indexed ``[i, m, r, k]``.
    """
    y = np.atleast_2d(y)
    r = np.linalg.norm(y, axis=1)
    small = r < SERIES_CUTOFF
    rs = np.where(small, 1.0, r)
    r2 = r * r
    f1 = np.where(small, 2 - 4 * r2 / 3 + 4 * r2**2 / 15 - 8 * r2**3 / 315, np.sin(2 * rs) / rs)
    f2 = np.where(small, 2 - 2 * r2 / 3 + 4 * r2**2 / 45 - 2 * r2**3 / 315, (1 - np.cos(2 * rs)) / rs**2)
    # (df/dr)/r
    g1 = np.where(
        small,
        -8 / 3 + 16 * r2 / 15 - 16 * r2**2 / 105,
        (2 * rs * np.cos(2 * rs) - np.sin(2 * rs)) / rs**3,
    )
    g2 = np.where(
        small,
        -4 / 3 + 16 * r2 / 45 - 4 * r2**2 / 105,
        (2 * rs * np.sin(2 * rs) - 2 * (1 - np.cos(2 * rs))) / rs**4,
    )
    eye = np.eye(3)
    K = _levi_civita_dot(y)
    yy = y[:, :, None] * y[:, None, :]
    c = np.cos(2 * r)[:, None, None] * eye - f1[:, None, None] * K + f2[:, None, None] * yy

    Km = _levi_civita_dot(eye)  # Km[m] = K(e_m)
    ey = eye[None, :, :, None] * y[:, None, None, :]  # [i, m, r, k] = delta_mr y_k
    dyy = ey + np.swapaxes(ey, 2, 3)
    ym = y[:, :, None, None]
    dc = (
        -2 * f1[:, None, None, None] * ym * eye
        - g1[:, None, None, None] * ym * K[:, None]
        - f1[:, None, None, None] * Km[None]
        + g2[:, None, None, None] * ym * yy[:, None]
        + f2[:, None, None, None] * dyy
    )
    return c, dc


def conjugation_coeffs(yi) -> ConjugationCoeffs:
    c, _ = _rotation_coeffs(np.asarray(yi, dtype=float)[None, :])
    return ConjugationCoeffs(c[0], c[0] @ BASIS_CHANGE)


# --- literal per-term view -----------------------------------------------------


@dataclass(frozen=True)
class TermCache:
    """Factors ``P_ij^a`` (rows a = -1, 0, +1; one column per site j) and products ``P_i^a``."""

    site: int
    factors: np.ndarray
    products: np.ndarray


def sx_term_cache(params: GcsParams, i: int) -> TermCache:
    """All single-spin factors of the one-body expectation at site ``i``, one site at a time.

    Straight transcription of the factorized product, kept for inspection and as a
    second route to the fast kernel.
    """
    psi, _ = _spin_states(params.x)
    ops = {-1: _SIGMA[0] - 1j * _SIGMA[1], 0: 2 * _SIGMA[2], 1: _SIGMA[0] + 1j * _SIGMA[1]}
    factors = np.ones((3, params.n), dtype=complex)
    for row, a in enumerate((-1, 0, 1)):
        for j in range(params.n):
            phase = np.diag(np.exp(1j * KAPPA * a * params.m[i, j] * np.array([1.0, -1.0])))
            op = phase @ (ops[a] / 2) if j == i else phase
            factors[row, j] = psi[j].conj() @ op @ psi[j]
    return TermCache(i, factors, np.prod(factors, axis=1))


def _expval_literal(params: GcsParams, i: int, row: str) -> float:
    cache = sx_term_cache(params, i)
    d = conjugation_coeffs(params.y[i]).d
    val = d[_ROWS[row]] @ cache.products
    if abs(val.imag) > 1e-9:
        raise NumericalError(f"imaginary residue {val.imag:.3e} in <sigma_{row}^({i})>")
    return float(val.real)


# --- batched kernels ------------------------------------------------------------


@dataclass(frozen=True)
class TermPlan:
    """Index layout for a batch of one-body and ZZ terms.

    ``one_support[t]`` lists the sites whose coupling to ``one_sites[t]`` may be nonzero;
    ``two_support[t]`` does the same for the pair ``(two_i[t], two_j[t])`` excluding the
    pair itself. Rows are padded with the dummy index ``n``, whose factor is 1.
    """

    n: int
    one_sites: np.ndarray
    one_support: np.ndarray
    two_i: np.ndarray
    two_j: np.ndarray
    two_support: np.ndarray
    mask: np.ndarray | None = None


def _pad(rows: list[np.ndarray], fill: int) -> np.ndarray:
    width = max((len(r) for r in rows), default=0)
    out = np.full((len(rows), width), fill, dtype=np.int64)
    for t, r in enumerate(rows):
        out[t, : len(r)] = r
    return out


def build_plan(n: int, one_sites=None, pairs=None, mask=None) -> TermPlan:
    """Plan evaluation of ``one_sites`` (default: all) and ``pairs`` (``(T, 2)`` array).

    ``mask`` is a boolean ``n x n`` support pattern for ``M``; ``None`` means dense.
    """
    one_sites = np.arange(n) if one_sites is None else np.asarray(one_sites, dtype=np.int64).ravel()
    pairs = np.zeros((0, 2), dtype=np.int64) if pairs is None else np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise ValueError("ZZ terms need two distinct sites; same-site products are constants")
    ti, tj = pairs[:, 0], pairs[:, 1]
    if mask is None or np.all(mask | np.eye(n, dtype=bool)):
        idx = np.arange(n)
        full = np.broadcast_to(idx, (one_sites.size, n))
        one = full[full != one_sites[:, None]].reshape(one_sites.size, n - 1)
        full2 = np.broadcast_to(idx, (ti.size, n))
        keep = (full2 != ti[:, None]) & (full2 != tj[:, None])
        two = full2[keep].reshape(ti.size, max(n - 2, 0))
        return TermPlan(n, one_sites, one, ti, tj, two, None)
    mask = np.asarray(mask, dtype=bool) & ~np.eye(n, dtype=bool)
    neigh = [np.nonzero(mask[i])[0] for i in range(n)]
    one = _pad([neigh[i] for i in one_sites], n)
    two = _pad(
        [np.setdiff1d(np.union1d(neigh[i], neigh[j]), (i, j)) for i, j in zip(ti, tj)], n
    )
    return TermPlan(n, one_sites, one, ti, tj, two, mask)


def _loo(F: np.ndarray):
    """Full products and leave-one-out products along the last axis, without division."""
    ones = np.ones(F.shape[:-1] + (1,), dtype=F.dtype)
    pre = np.cumprod(np.concatenate([ones, F[..., :-1]], axis=-1), axis=-1)
    suf = np.cumprod(np.concatenate([ones, F[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return pre[..., -1] * F[..., -1], pre * suf


class _Site:
    """Per-site quantities shared by all terms of one evaluation (padded by one dummy site)."""

    def __init__(self, params: GcsParams, need_grad: bool):
        n = params.n
        bloch, self.jac = _bloch(params.x.reshape(n, 3))
        self.z = np.append(bloch[:, 2], 0.0)
        self.sp = np.append((bloch[:, 0] + 1j * bloch[:, 1]) / 2, 0.0)
        self.m = np.zeros((n + 1, n + 1))
        self.m[:n, :n] = params.m
        c, self.dc = _rotation_coeffs(params.y)
        self.d = c @ BASIS_CHANGE  # (n, 3, 3)
        self.n = n
        self.need_grad = need_grad
        if need_grad:
            self.gz = np.zeros(n + 1)
            self.gsp = np.zeros(n + 1, dtype=complex)  # dL/dX + i dL/dY
            self.gm = np.zeros((n + 1) * (n + 1))
            self.gd = np.zeros((n, 3, 3), dtype=complex)

    def add_m(self, rows, cols, vals):
        idx = (np.asarray(rows) * (self.n + 1) + cols).ravel()
        self.gm += np.bincount(idx, weights=np.asarray(vals).ravel(), minlength=self.gm.size)

    def add_z(self, sites, vals):
        self.gz += np.bincount(np.asarray(sites).ravel(), weights=np.asarray(vals).ravel(), minlength=self.n + 1)


_CHUNK = 1 << 20


def _one_body(site: _Site, sites, support, rows, weights) -> np.ndarray:
    """Values ``w_t <sigma_r^(i)>`` for a chunk of one-body terms; accumulates adjoints."""
    z, sp, d = site.z, site.sp, site.d
    theta = KAPPA * site.m[sites[:, None], support]
    cos, sin = np.cos(theta), np.sin(theta)
    zk = z[support]
    F = np.concatenate([sp[sites, None], cos + 1j * zk * sin], axis=1)
    if site.need_grad:
        E, loo = _loo(F)
    else:
        E = np.prod(F, axis=1)
    d0 = d[sites, rows, 1].real
    dp = d[sites, rows, 2]
    vals = weights * (d0 * z[sites] + 2 * (dp * E).real)
    if site.need_grad:
        coef = (2 * weights * dp)[:, None] * loo
        site.gsp += np.bincount(sites, weights=coef[:, 0].real, minlength=site.n + 1)
        site.gsp += 1j * np.bincount(sites, weights=-coef[:, 0].imag, minlength=site.n + 1)
        rest = coef[:, 1:]
        site.add_z(support, (rest * 1j * sin).real)
        site.add_m(sites[:, None], support, KAPPA * (rest * (-sin + 1j * zk * cos)).real)
        site.add_z(sites, weights * d0)
        np.add.at(site.gd, (sites, rows, 1), weights * z[sites])
        np.add.at(site.gd, (sites, rows, 2), 2 * weights * E)
    return vals


# (alpha, beta) pairs whose conjugates (-alpha, -beta) complete the 9-term double sum
_COMBOS = np.array([(0, 1), (1, 0), (1, 1), (1, -1)])


def _two_body(site: _Site, ti, tj, support, weights) -> np.ndarray:
    """Values ``w_t <Z_i Z_j>`` for a chunk of pairs; accumulates adjoints."""
    z, sp, d = site.z, site.sp, site.d
    al = _COMBOS[:, 0][None, :, None].astype(float)
    be = _COMBOS[:, 1][None, :, None].astype(float)
    mi = site.m[ti[:, None], support][:, None, :]
    mj = site.m[tj[:, None], support][:, None, :]
    theta = KAPPA * (al * mi + be * mj)  # (T, 4, D)
    cos, sin = np.cos(theta), np.sin(theta)
    zk = z[support][:, None, :]
    Fk = cos + 1j * zk * sin

    mij = site.m[ti, tj][:, None]
    a1, b1 = _COMBOS[:, 0][None, :], _COMBOS[:, 1][None, :]
    phi = KAPPA * b1 * mij  # phase entering the site-i factor
    phj = KAPPA * a1 * mij  # phase entering the site-j factor
    zi, zj = z[ti][:, None], z[tj][:, None]
    spi, spj = sp[ti][:, None], sp[tj][:, None]
    # site i: Z e^{i phi Z} (alpha=0) or sigma_+ e^{i phi Z} = e^{-i phi} sigma_+ (alpha=1)
    fi = np.where(a1 == 0, zi * np.cos(phi) + 1j * np.sin(phi), np.exp(-1j * phi) * spi)
    # site j: e^{i phj Z} Z, e^{i phj Z} sigma_+ = e^{i phj} sigma_+, e^{i phj Z} sigma_- = e^{-i phj} sigma_-
    fj = np.where(
        b1 == 0,
        zj * np.cos(phj) + 1j * np.sin(phj),
        np.where(b1 == 1, np.exp(1j * phj) * spj, np.exp(-1j * phj) * spj.conj()),
    )
    F = np.concatenate([fi[:, :, None], fj[:, :, None], Fk], axis=2)
    if site.need_grad:
        E, loo = _loo(F)
    else:
        E = np.prod(F, axis=2)
    di = d[ti, 2][:, _COMBOS[:, 0] + 1]  # (T, 4)
    dj = d[tj, 2][:, _COMBOS[:, 1] + 1]
    d0i, d0j = d[ti, 2, 1].real, d[tj, 2, 1].real
    w = weights
    vals = w * (d0i * d0j * z[ti] * z[tj] + 2 * np.sum(di * dj * E, axis=1).real)
    if not site.need_grad:
        return vals

    coef = (2 * w)[:, None] * di * dj  # (T, 4)
    lc = coef[:, :, None] * loo
    li, lj, lk = lc[:, :, 0], lc[:, :, 1], lc[:, :, 2:]
    # spectator sites
    site.add_z(np.broadcast_to(support[:, None, :], lk.shape), (lk * 1j * sin).real)
    gth = KAPPA * (lk * (-sin + 1j * zk * cos)).real
    site.add_m(ti[:, None], support, np.sum(al * gth, axis=1))
    site.add_m(tj[:, None], support, np.sum(be * gth, axis=1))
    # site i factor
    a0 = a1 == 0
    dz_i = np.where(a0, np.cos(phi), 0.0)
    dsp_i = np.where(a0, 0.0, np.exp(-1j * phi))
    dphi = np.where(a0, -zi * np.sin(phi) + 1j * np.cos(phi), -1j * fi)
    site.add_z(ti, np.sum((li * dz_i).real, axis=1))
    gsp_i = np.sum(li * dsp_i, axis=1)
    site.gsp += np.bincount(ti, weights=gsp_i.real, minlength=site.n + 1)
    site.gsp += 1j * np.bincount(ti, weights=-gsp_i.imag, minlength=site.n + 1)
    site.add_m(tj, ti, np.sum(KAPPA * b1 * (li * dphi).real, axis=1))
    # site j factor
    b0 = b1 == 0
    dz_j = np.where(b0, np.cos(phj), 0.0)
    dsp_j = np.where(b1 == 1, np.exp(1j * phj), 0.0)
    dspc_j = np.where(b1 == -1, np.exp(-1j * phj), 0.0)  # coefficient of conj(sp_j)
    dphj = np.where(b0, -zj * np.sin(phj) + 1j * np.cos(phj), np.where(b1 == 1, 1j * fj, -1j * fj))
    site.add_z(tj, np.sum((lj * dz_j).real, axis=1))
    gsp_j = np.sum(lj * dsp_j, axis=1)
    gspc_j = np.sum(lj * dspc_j, axis=1)
    # f = a sp: dL/dX = Re(a)/2.., stored as 2 dL/dsp* convention below
    site.gsp += np.bincount(tj, weights=(gsp_j.real + gspc_j.real), minlength=site.n + 1)
    site.gsp += 1j * np.bincount(tj, weights=(-gsp_j.imag + gspc_j.imag), minlength=site.n + 1)
    site.add_m(ti, tj, np.sum(KAPPA * a1 * (lj * dphj).real, axis=1))
    # direct (0,0) term
    site.add_z(ti, w * d0i * d0j * z[tj])
    site.add_z(tj, w * d0i * d0j * z[ti])
    # coefficient adjoints
    np.add.at(site.gd, (ti, 2, 1), w * d0j * z[ti] * z[tj])
    np.add.at(site.gd, (tj, 2, 1), w * d0i * z[ti] * z[tj])
    for c, (a, b) in enumerate(_COMBOS):
        np.add.at(site.gd, (ti, 2, a + 1), 2 * w * dj[:, c] * E[:, c])
        np.add.at(site.gd, (tj, 2, b + 1), 2 * w * di[:, c] * E[:, c])
    return vals


def _run(site: _Site, plan: TermPlan, one_rows, one_w, two_w):
    one_vals = np.zeros(plan.one_sites.size)
    two_vals = np.zeros(plan.two_i.size)
    step = max(1, _CHUNK // max(1, plan.one_support.shape[1] + 1))
    for lo in range(0, plan.one_sites.size, step):
        sl = slice(lo, lo + step)
        one_vals[sl] = _one_body(site, plan.one_sites[sl], plan.one_support[sl], one_rows[sl], one_w[sl])
    step = max(1, _CHUNK // (4 * (plan.two_support.shape[1] + 2)))
    for lo in range(0, plan.two_i.size, step):
        sl = slice(lo, lo + step)
        two_vals[sl] = _two_body(site, plan.two_i[sl], plan.two_j[sl], plan.two_support[sl], two_w[sl])
    return one_vals, two_vals


def expectations(params: GcsParams, plan: TermPlan, row: str = "x"):
    """Unweighted ``<sigma_row^(i)>`` for the plan's sites and ``<Z_i Z_j>`` for its pairs."""
    if plan.n != params.n:
        raise ValueError("plan and parameters disagree on n")
    site = _Site(params, need_grad=False)
    rows = np.full(plan.one_sites.size, _ROWS[row])
    one, two = _run(site, plan, rows, np.ones(plan.one_sites.size), np.ones(plan.two_i.size))
    _check_finite(one, "one-body expectation")
    _check_finite(two, "ZZ expectation")
    return one, two


def _nonzero_mask(params: GcsParams) -> np.ndarray:
    return params.m != 0


def expval_sx(params: GcsParams, i: int) -> float:
    """``<sigma_x^(i)>``; couplings with ``M_ij == 0`` are skipped."""
    plan = build_plan(params.n, [i], None, _nonzero_mask(params))
    return float(expectations(params, plan, "x")[0][0])


def expval_z(params: GcsParams, i: int) -> float:
    plan = build_plan(params.n, [i], None, _nonzero_mask(params))
    return float(expectations(params, plan, "z")[0][0])


def expval_zz(params: GcsParams, i: int, j: int) -> float:
    if i == j:
        raise ValueError("expval_zz needs i != j; Z_i Z_i is the identity")
    plan = build_plan(params.n, [], [(i, j)], _nonzero_mask(params))
    return float(expectations(params, plan)[1][0])


def _check_finite(arr, what: str):
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        raise NumericalError(f"non-finite {what} at index {tuple(bad[0])}")


def _check_inputs(inst: QuboInstance, params: GcsParams, s: float):
    if inst.has_bias:
        raise ValueError("instance has linear biases; apply fold_bias() first")
    if inst.n != params.n:
        raise ValueError(f"instance has {inst.n} spins but parameters have {params.n}")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"schedule fraction must lie in [0, 1], got {s}")


def _hamiltonian_terms(inst: QuboInstance, s: float):
    n = inst.n
    one_w = np.full(n, -(1.0 - s))
    two_w = 2.0 * s * inst.weights
    return np.zeros(n, dtype=np.int64), one_w, two_w


def loss_plan(inst: QuboInstance, mask=None) -> TermPlan:
    """Plan covering every site (transverse field) and every bond of ``inst``."""
    return build_plan(inst.n, None, np.stack([inst.rows, inst.cols], axis=1), mask)


def loss(params: GcsParams, s: float, inst: QuboInstance, plan: TermPlan | None = None) -> float:
    """``<s H_I + (1 - s) H_TF>`` with ``H_I = sum_{ij} W_ij Z_i Z_j + offset``, ``H_TF = -sum X_i``."""
    _check_inputs(inst, params, s)
    if plan is None:
        plan = loss_plan(inst, _nonzero_mask(params))
    site = _Site(params, need_grad=False)
    rows, one_w, two_w = _hamiltonian_terms(inst, s)
    one, two = _run(site, plan, rows, one_w, two_w)
    _check_finite(one, "transverse-field term")
    _check_finite(two, "coupling term")
    return math.fsum(one) + math.fsum(two) + s * inst.offset


def gradient(params: GcsParams, s: float, inst: QuboInstance, plan: TermPlan | None = None, with_loss: bool = False):
    """Analytic gradient ``(gx, gm, gy)`` of ``loss``.

    ``gm[i, j] = gm[j, i]`` is the derivative with respect to the single symmetric
    coupling ``M_ij = M_ji``; its diagonal is zero. With ``plan.mask`` set, ``gm`` is
    restricted to that support. ``with_loss=True`` also returns the loss value.
    """
    _check_inputs(inst, params, s)
    if plan is None:
        plan = loss_plan(inst)
    n = params.n
    site = _Site(params, need_grad=True)
    rows, one_w, two_w = _hamiltonian_terms(inst, s)
    one, two = _run(site, plan, rows, one_w, two_w)

    gbloch = np.stack([site.gsp[:n].real / 2, site.gsp[:n].imag / 2, site.gz[:n]], axis=1)
    gx = np.einsum("na,nam->nm", gbloch, site.jac)
    raw = site.gm.reshape(n + 1, n + 1)[:n, :n]
    gm = raw + raw.T
    np.fill_diagonal(gm, 0.0)
    if plan.mask is not None:
        gm = np.where(plan.mask, gm, 0.0)
    dd = site.dc @ BASIS_CHANGE  # (n, m, 3, 3)
    gy = np.einsum("nra,nmra->nm", site.gd, dd).real
    for name, block in (("x", gx), ("M", gm), ("y", gy)):
        _check_finite(block, f"gradient block {name}")
    if with_loss:
        return (gx, gm, gy), math.fsum(one) + math.fsum(two) + s * inst.offset
    return gx, gm, gy
