"""Heat kernel on U(N) for the scaled Hilbert-Schmidt metric.

The density with respect to normalized Haar measure is the character series

    rho_t(U) = sum_lambda dim(lambda) chi_lambda(U) exp(-c2(lambda) t / 2)

over highest weights ``lambda_1 >= ... >= lambda_N`` of U(N).  With the metric
``N trace(X* Y)`` the Casimir eigenvalue is
``c2(lambda) = (1/N) sum_i lambda_i (lambda_i + N + 1 - 2 i)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .unitary import GroupSpec

ANGLE_GAP = 0.05
MAX_AUTO_CUTOFF = 400


class TruncationError(RuntimeError):
    """The character series cannot meet the tolerance at the given cutoff."""


@dataclass(frozen=True)
class HKParams:
    tolerance: float = 1e-12
    cutoff: int | None = None  # None means choose automatically
    brownian_step: float = 1e-3

    def __post_init__(self):
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.cutoff is not None and self.cutoff < 1:
            raise ValueError("weight cutoff must be >= 1")
        if not self.brownian_step > 0:
            raise ValueError("brownian_step must be positive")


def _N(spec) -> int:
    return spec.N if isinstance(spec, GroupSpec) else int(spec)


def check_weight(lam: Sequence[int]) -> tuple[int, ...]:
    lam = tuple(int(x) for x in lam)
    if any(a < b for a, b in zip(lam, lam[1:])):
        raise ValueError(f"highest weight must be non-increasing, got {lam}")
    return lam


def casimir(lam: Sequence[int], spec=None) -> float:
    """Eigenvalue of minus the Laplacian on the ``lam``-isotypic component."""
    lam = check_weight(lam)
    N = len(lam) if spec is None else _N(spec)
    if len(lam) != N:
        raise ValueError(f"weight {lam} has the wrong length for U({N})")
    return sum(l * (l + N + 1 - 2 * i) for i, l in enumerate(lam, start=1)) / N


def weyl_dim(lam: Sequence[int], spec=None) -> int:
    lam = check_weight(lam)
    N = len(lam)
    num = den = 1
    for i in range(N):
        for j in range(i + 1, N):
            num *= lam[i] - lam[j] + j - i
            den *= j - i
    return num // den


# -- symmetric functions ----------------------------------------------------

def elementary_from_matrix(U: np.ndarray) -> np.ndarray:
    """Elementary symmetric functions e_0..e_N of the eigenvalues of ``U``.

    Computed from power traces with Newton's identities; no eigen-solve.
    """
    U = np.asarray(U, dtype=complex)
    N = U.shape[-1]
    batch = U.shape[:-2]
    e = np.zeros(batch + (N + 1,), complex)
    e[..., 0] = 1.0
    if N == 1:
        e[..., 1] = U[..., 0, 0]
        return e
    if N == 2:
        e[..., 1] = U[..., 0, 0] + U[..., 1, 1]
        e[..., 2] = U[..., 0, 0] * U[..., 1, 1] - U[..., 0, 1] * U[..., 1, 0]
        return e
    p = np.zeros(batch + (N + 1,), complex)
    P = U
    for k in range(1, N + 1):
        p[..., k] = np.trace(P, axis1=-2, axis2=-1)
        if k < N:
            P = P @ U
    for k in range(1, N + 1):
        acc = 0
        for i in range(1, k + 1):
            acc = acc + (-1) ** (i - 1) * e[..., k - i] * p[..., i]
        e[..., k] = acc / k
    return e


def complete_homogeneous(e: np.ndarray, K: int) -> np.ndarray:
    """h_0..h_K from e_0..e_N via ``h_k = sum_j (-1)^(j-1) e_j h_(k-j)``."""
    N = e.shape[-1] - 1
    h = np.zeros(e.shape[:-1] + (K + 1,), complex)
    h[..., 0] = 1.0
    for k in range(1, K + 1):
        acc = 0
        for j in range(1, min(k, N) + 1):
            acc = acc + (-1) ** (j - 1) * e[..., j] * h[..., k - j]
        h[..., k] = acc
    return h


def _schur_jacobi_trudi(h: np.ndarray, mus: np.ndarray) -> np.ndarray:
    """Schur functions s_mu = det(h_(mu_i - i + j)) for an array of partitions.

    ``h`` has shape ``(..., K+1)``; ``mus`` has shape ``(M, N)`` with
    ``mu_N = 0``.  Returns shape ``(..., M)``.
    """
    M, N = mus.shape
    if N == 1:
        return np.ones(h.shape[:-1] + (M,), complex)
    if N == 2:
        return h[..., mus[:, 0]]
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    idx = mus[:, :, None] - ii[None] + jj[None]  # (M, N, N)
    valid = idx >= 0
    hpad = np.concatenate([h, np.zeros(h.shape[:-1] + (1,), complex)], axis=-1)
    idx = np.where(valid, idx, h.shape[-1])
    mats = hpad[..., idx]  # (..., M, N, N)
    return np.linalg.det(mats)


def _eigvals(U: np.ndarray) -> np.ndarray:
    try:
        z = np.linalg.eigvals(U)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("eigenvalue computation failed; input is ill-conditioned") from exc
    if not np.all(np.isfinite(z)):
        raise ArithmeticError("eigenvalue computation produced non-finite values")
    return z


def character(lam: Sequence[int], U: np.ndarray) -> complex:
    """Character of the irreducible representation ``lam`` at ``U``.

    Uses the bialternant ratio when the eigenvalue angles are separated by
    more than ``ANGLE_GAP``; otherwise the Jacobi-Trudi determinant of
    complete homogeneous polynomials, which are the divided differences of
    the monomials and stay finite at coincident eigenvalues.
    """
    lam = check_weight(lam)
    U = np.asarray(U, dtype=complex)
    N = U.shape[-1]
    if len(lam) != N:
        raise ValueError(f"weight {lam} has the wrong length for U({N})")
    z = _eigvals(U)
    if N == 1:
        return complex(z[0] ** lam[0])
    ang = np.angle(z)
    gaps = [abs(np.angle(np.exp(1j * (a - b)))) for a, b in itertools.combinations(ang, 2)]
    if min(gaps) > ANGLE_GAP:
        rho = np.arange(N - 1, -1, -1)
        num = np.linalg.det(z[None, :] ** (np.array(lam) + rho)[:, None])
        den = np.linalg.det(z[None, :] ** rho[:, None])
        return complex(num / den)
    e = np.poly(z)
    e = np.array([(-1) ** k * e[k] for k in range(N + 1)])
    shift = lam[-1]
    mu = np.array([[l - shift for l in lam]])
    h = complete_homogeneous(e, int(mu.max()) + N)
    s = _schur_jacobi_trudi(h, mu)[0]
    return complex(np.prod(z) ** shift * s)


# -- truncation -------------------------------------------------------------

def tail_bound(N: int, t: float, cutoff: int) -> float:
    """Upper bound on ``sum dim^2 exp(-c2 t/2)`` over weights with max|lambda_i| > cutoff.

    Uses c2 >= max|lambda_i|^2 / N, dim <= (2M+1)^(N(N-1)/2) and at most
    2 (2M+1)^(N-1) weights with max|lambda_i| = M.
    """
    total = 0.0
    power = (N - 1) + N * (N - 1)
    M = cutoff + 1
    while True:
        logterm = math.log(2.0) + power * math.log(2 * M + 1) - M * M * t / (2 * N)
        term = math.exp(logterm)
        total += term
        if M * M * t / (2 * N) > power * math.log(2 * M + 1) + 60 and term < 1e-300 + 1e-30 * total:
            break
        if M > 10 * cutoff + 10000:
            break
        M += 1
    return total


def choose_cutoff(N: int, t: float, eps: float) -> int:
    if not t > 0:
        raise ValueError("heat kernel time must be positive")
    lo = 1
    while tail_bound(N, t, lo) >= eps:
        lo *= 2
        if lo > MAX_AUTO_CUTOFF:
            raise TruncationError(f"t={t} too small for tolerance {eps} at U({N})")
    hi, lo = lo, max(1, lo // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if tail_bound(N, t, mid) < eps:
            hi = mid
        else:
            lo = mid + 1
    return hi


@lru_cache(maxsize=64)
def _weights(N: int, cutoff: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Weights with max|lambda_i| <= cutoff grouped as lambda = mu + k (1,...,1).

    Returns (mus, shifts, dims, casimirs) where the last three are arrays of
    shape (len(mus), 2*cutoff+1) indexed by k + cutoff, with zero dims for
    combinations outside the box.
    """
    ks = np.arange(-cutoff, cutoff + 1)
    mus = []
    for lam in itertools.combinations_with_replacement(range(2 * cutoff, -1, -1), N - 1):
        mu = tuple(lam) + (0,)
        if all(a >= b for a, b in zip(mu, mu[1:])):
            mus.append(mu)
    mus = np.array(sorted(set(mus)), dtype=int).reshape(-1, N)
    dims = np.zeros((len(mus), len(ks)))
    cas = np.zeros((len(mus), len(ks)))
    for a, mu in enumerate(mus):
        d = weyl_dim(mu)
        c_mu = casimir(mu, N)
        size = int(mu.sum())
        for b, k in enumerate(ks):
            if mu[0] + k > cutoff or k < -cutoff:
                continue
            dims[a, b] = d
            cas[a, b] = c_mu + 2.0 * k * size / N + k * k
    keep = dims.any(axis=1)
    return mus[keep], ks, dims[keep], cas[keep]


class HeatKernelTable:
    """Truncated character expansion of rho_t for one (N, t), reusable on batches."""

    def __init__(self, N: int, t: float, params: HKParams = HKParams()):
        if not t > 0:
            raise ValueError("heat kernel time must be positive")
        self.N, self.t, self.params = int(N), float(t), params
        if params.cutoff is None:
            cutoff = choose_cutoff(self.N, self.t, params.tolerance)
        else:
            cutoff = params.cutoff
            if tail_bound(self.N, self.t, cutoff) >= params.tolerance:
                raise TruncationError(
                    f"cutoff {cutoff} cannot reach tolerance {params.tolerance} at t={t}, U({N})"
                )
        self.cutoff = cutoff
        mus, ks, dims, cas = _weights(self.N, cutoff)
        self.mus, self.ks = mus, ks
        w = dims * np.exp(-0.5 * cas * self.t)
        self.coef = w
        self.coef_dt = -0.5 * cas * w
        self.K = int(mus[:, 0].max()) + self.N

    def _basis(self, U):
        U = np.asarray(U, dtype=complex)
        e = elementary_from_matrix(U)
        h = complete_homogeneous(e, self.K)
        s = _schur_jacobi_trudi(h, self.mus)  # (..., M)
        d = e[..., self.N]
        d = d / np.abs(d)
        pw = np.exp(1j * np.angle(d)[..., None] * self.ks)  # (..., K)
        return s, pw

    def density(self, U) -> np.ndarray:
        s, pw = self._basis(U)
        return np.einsum("...m,mk,...k->...", s, self.coef, pw).real

    def density_and_dt(self, U) -> tuple[np.ndarray, np.ndarray]:
        s, pw = self._basis(U)
        rho = np.einsum("...m,mk,...k->...", s, self.coef, pw).real
        drho = np.einsum("...m,mk,...k->...", s, self.coef_dt, pw).real
        return rho, drho

    def complex_density(self, U) -> np.ndarray:
        s, pw = self._basis(U)
        return np.einsum("...m,mk,...k->...", s, self.coef, pw)


@lru_cache(maxsize=256)
def heat_kernel_table(N: int, t: float, params: HKParams = HKParams()) -> HeatKernelTable:
    return HeatKernelTable(N, t, params)


def hk_density(t: float, U: np.ndarray, p: HKParams = HKParams()) -> float | np.ndarray:
    """rho_t(U) with respect to normalized Haar measure; accepts batches."""
    U = np.asarray(U, dtype=complex)
    tab = heat_kernel_table(U.shape[-1], float(t), p)
    val = tab.complex_density(U)
    if np.any(np.abs(val.imag) > 1e-9 * np.maximum(1.0, np.abs(val.real))):
        raise ArithmeticError("heat kernel series has a non-negligible imaginary part")
    out = val.real
    return float(out) if out.ndim == 0 else out


def hk_dt(t: float, U: np.ndarray, p: HKParams = HKParams()) -> float | np.ndarray:
    """Time derivative of rho_t(U), summed term by term."""
    U = np.asarray(U, dtype=complex)
    tab = heat_kernel_table(U.shape[-1], float(t), p)
    _, d = tab.density_and_dt(U)
    return float(d) if d.ndim == 0 else d


def hk_sample(t: float, spec, p: HKParams = HKParams(), rng: np.random.Generator | None = None,
              size=None) -> np.ndarray:
    """Approximate Brownian motion on U(N) at time ``t`` started at the identity.

    The path is a product of ``m = ceil(t / brownian_step)`` geodesic
    increments ``exp(sqrt(t/m) G)`` with ``G`` standard Gaussian in u(N).
    """
    from ._brownian import brownian_products

    if not t > 0:
        raise ValueError("t must be positive")
    N = _N(spec)
    rng = np.random.default_rng() if rng is None else rng
    n = 1 if size is None else int(np.prod(size))
    m = max(1, math.ceil(t / p.brownian_step - 1e-12))
    out = brownian_products(N, m, math.sqrt(t / m), n, rng)
    if size is None:
        return out[0]
    shape = (size,) if np.isscalar(size) else tuple(size)
    return out.reshape(shape + (N, N))
