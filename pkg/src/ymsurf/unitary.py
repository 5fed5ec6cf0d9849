"""Arithmetic on U(N) with the metric <X, Y> = N trace(X* Y)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class GroupSpec:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")

    @property
    def metric_scale(self) -> int:
        return self.N

    @property
    def dim(self) -> int:
        return self.N * self.N


def inner(X: np.ndarray, Y: np.ndarray) -> complex:
    """Scaled Hilbert-Schmidt inner product ``N trace(X* Y)``."""
    N = X.shape[-1]
    return N * np.einsum("...ij,...ij->...", X.conj(), Y)


@lru_cache(maxsize=None)
def _lie_basis(N: int) -> np.ndarray:
    mats = []
    scale = 1.0 / np.sqrt(N)
    for j in range(N):
        X = np.zeros((N, N), complex)
        X[j, j] = 1j
        mats.append(X * scale)
    r = 1.0 / np.sqrt(2.0)
    for j in range(N):
        for k in range(j + 1, N):
            X = np.zeros((N, N), complex)
            X[j, k], X[k, j] = r, -r
            mats.append(X * scale)
            Y = np.zeros((N, N), complex)
            Y[j, k] = Y[k, j] = 1j * r
            mats.append(Y * scale)
    basis = np.array(mats)
    basis.setflags(write=False)
    return basis


def lie_basis(spec: GroupSpec | int) -> np.ndarray:
    """Orthonormal basis of u(N), shape ``(N*N, N, N)``, read-only."""
    N = spec.N if isinstance(spec, GroupSpec) else int(spec)
    return _lie_basis(N)


def algebra_gaussian(N: int, rng: np.random.Generator, size=()) -> np.ndarray:
    """Standard Gaussian in u(N): ``sum_k g_k X_k`` with iid N(0,1) coefficients."""
    size = (size,) if np.isscalar(size) else tuple(size)
    g = rng.standard_normal(size + (N * N,))
    return np.einsum("...k,kij->...ij", g, lie_basis(N))


def expm_skew(A: np.ndarray) -> np.ndarray:
    """Exponential of (batched) anti-Hermitian matrices.

    Uses the spectral decomposition of the Hermitian matrix ``-iA``, so the
    result is unitary to rounding.
    """
    H = -1j * A
    H = 0.5 * (H + np.swapaxes(H, -1, -2).conj())
    w, V = np.linalg.eigh(H)
    return (V * np.exp(1j * w)[..., None, :]) @ np.swapaxes(V, -1, -2).conj()


def unitarity_defect(U: np.ndarray) -> np.ndarray:
    N = U.shape[-1]
    D = np.swapaxes(U, -1, -2).conj() @ U - np.eye(N)
    return np.abs(D).max(axis=(-2, -1))


def reunitarize(U: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    """Polar projection onto U(N) for matrices whose defect exceeds ``tol``."""
    U = np.asarray(U, dtype=complex)
    bad = unitarity_defect(U) > tol
    if not np.any(bad):
        return U
    if U.ndim == 2:
        W, _, Vh = np.linalg.svd(U)
        return W @ Vh
    out = U.copy()
    W, _, Vh = np.linalg.svd(U[bad])
    out[bad] = W @ Vh
    return out


def haar_sample(spec: GroupSpec | int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Haar-distributed unitaries via QR of a complex Ginibre matrix.

    The phases of ``diag(R)`` are moved into ``Q`` so the law is exactly Haar.
    """
    N = spec.N if isinstance(spec, GroupSpec) else int(spec)
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    Z = (rng.standard_normal(shape + (N, N)) + 1j * rng.standard_normal(shape + (N, N))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return Q * ph[..., None, :]


def normalized_trace(U: np.ndarray) -> complex | np.ndarray:
    N = U.shape[-1]
    return np.trace(U, axis1=-2, axis2=-1) / N


def dagger(U: np.ndarray) -> np.ndarray:
    return np.swapaxes(U, -1, -2).conj()


def word_eval(word: Sequence[tuple], config: Mapping[str, np.ndarray], N: int | None = None) -> np.ndarray:
    """Ordered product of edge variables; ``(name, -1)`` contributes the inverse.

    ``word`` is in product order (left factor first), as produced by
    :func:`ymsurf.surfgraph.holonomy_word`.  Entries of ``config`` may be
    batched ``(..., N, N)`` arrays; they broadcast.
    """
    result = None
    for name, sign in word:
        try:
            x = config[name]
        except KeyError:
            raise KeyError(f"edge variable {name!r} is not assigned") from None
        x = x if sign > 0 else dagger(x)
        result = x if result is None else result @ x
    if result is None:
        if N is None:
            N = next(iter(config.values())).shape[-1]
        return np.eye(N, dtype=complex)
    if len(word) > 8:
        result = reunitarize(result)
    return result


def casimir_contraction(C: np.ndarray) -> np.ndarray:
    """``sum_X X C X`` over the orthonormal basis (equals ``-tr(C) I``)."""
    B = lie_basis(C.shape[-1])
    return np.einsum("kij,...jl,klm->...im", B, C, B)
