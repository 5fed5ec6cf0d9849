"""Compiled kernel for geodesic random walks on U(N)."""
from __future__ import annotations

import numba
import numpy as np

from .unitary import lie_basis


@numba.njit(cache=True, inline="always")
def _matmul(A, B, out):
    N = A.shape[0]
    for i in range(N):
        for j in range(N):
            acc = 0j
            for k in range(N):
                acc += A[i, k] * B[k, j]
            out[i, j] = acc


@numba.njit(cache=True)
def _expm_small(A, E, term, tmp):
    """exp(A) into ``E`` by Taylor series with scaling and squaring (error ~1e-16)."""
    N = A.shape[0]
    if N == 1:
        E[0, 0] = np.exp(A[0, 0])
        return
    nrm = 0.0
    for i in range(N):
        for j in range(N):
            nrm += A[i, j].real ** 2 + A[i, j].imag ** 2
    nrm = np.sqrt(nrm)
    if N == 2:
        # A = i a I + B with B traceless anti-Hermitian, B^2 = -theta^2 I
        tr = 0.5 * (A[0, 0] + A[1, 1])
        b00 = A[0, 0] - tr
        theta = np.sqrt(b00.real ** 2 + b00.imag ** 2 + A[0, 1].real ** 2 + A[0, 1].imag ** 2)
        c = np.cos(theta)
        sc = np.sin(theta) / theta if theta > 1e-8 else 1.0 - theta * theta / 6.0
        ph = np.exp(tr)
        E[0, 0] = ph * (c + sc * b00)
        E[1, 1] = ph * (c - sc * b00)
        E[0, 1] = ph * sc * A[0, 1]
        E[1, 0] = ph * sc * A[1, 0]
        return
    s = 0
    while nrm > 0.25:
        nrm *= 0.5
        s += 1
    scale = 1.0 / (2.0 ** s)
    # number of Taylor terms from the bound |B|^k / k! < 1e-16
    K = 1
    bound = nrm
    while bound > 1e-16 and K < 30:
        K += 1
        bound *= nrm / K
    for i in range(N):
        for j in range(N):
            term[i, j] = 1.0 if i == j else 0.0
            E[i, j] = term[i, j]
    for k in range(1, K + 1):
        _matmul(term, A, tmp)
        f = scale / k
        for i in range(N):
            for j in range(N):
                term[i, j] = tmp[i, j] * f
                E[i, j] += term[i, j]
    for _ in range(s):
        _matmul(E, E, tmp)
        E[:, :] = tmp


@numba.njit(cache=True)
def _newton_schulz(U, tmp, tmp2):
    """One step U <- U (3 I - U* U) / 2 toward the nearest unitary."""
    N = U.shape[0]
    for i in range(N):
        for j in range(N):
            acc = 0j
            for k in range(N):
                acc += np.conj(U[k, i]) * U[k, j]
            tmp[i, j] = -0.5 * acc + (1.5 if i == j else 0.0)
    _matmul(U, tmp, tmp2)
    U[:, :] = tmp2


@numba.njit(cache=True)
def _walk(basis, sd, normals, out):
    n, m, d = normals.shape
    N = basis.shape[1]
    U = np.empty((N, N), dtype=np.complex128)
    G = np.empty((N, N), dtype=np.complex128)
    E = np.empty((N, N), dtype=np.complex128)
    term = np.empty((N, N), dtype=np.complex128)
    tmp = np.empty((N, N), dtype=np.complex128)
    tmp2 = np.empty((N, N), dtype=np.complex128)
    for a in range(n):
        for i in range(N):
            for j in range(N):
                U[i, j] = 1.0 if i == j else 0.0
        for step in range(m):
            G[:, :] = 0.0
            for k in range(d):
                g = normals[a, step, k] * sd
                for i in range(N):
                    for j in range(N):
                        G[i, j] += g * basis[k, i, j]
            _expm_small(G, E, term, tmp)
            _matmul(U, E, tmp)
            U[:, :] = tmp
            if (step + 1) % 64 == 0:
                _newton_schulz(U, tmp, tmp2)
        _newton_schulz(U, tmp, tmp2)
        out[a] = U


def brownian_products(N: int, m: int, sd: float, n: int, rng: np.random.Generator,
                      block: int = 4096) -> np.ndarray:
    """``n`` independent products of ``m`` increments ``exp(sd * G)``."""
    basis = np.ascontiguousarray(lie_basis(N))
    d = N * N
    out = np.empty((n, N, N), dtype=np.complex128)
    per = max(1, min(block, (1 << 22) // max(1, m * d)))
    for start in range(0, n, per):
        stop = min(n, start + per)
        normals = rng.standard_normal((stop - start, m, d))
        _walk(basis, float(sd), normals, out[start:stop])
    return out
