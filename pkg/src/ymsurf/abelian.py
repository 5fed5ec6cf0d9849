"""Exact U(1) Yang-Mills expectations by Fourier-mode lattice summation.

Each face density is expanded as ``rho_t(theta) = sum_n exp(-n^2 t/2) e^{i n theta}``
and each boundary constraint ``delta(hol - phi)`` as ``sum_k e^{i k (hol - phi)}``.
Integrating out every edge angle leaves one linear equation per edge on the
integer modes; the solutions form an affine lattice which is enumerated
inside an ellipsoid chosen from the tolerance.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class EmptyLattice(Exception):
    """The mode equations have no integer solution."""


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def integer_solve(A: Sequence[Sequence[int]], b: Sequence[int]) -> tuple[list[int], list[list[int]]]:
    """All integer solutions of ``A x = b`` as ``x0 + K y``.

    Column echelon reduction with unimodular column operations; returns the
    particular solution ``x0`` and the kernel basis as a list of columns.
    Raises :class:`EmptyLattice` if there is no integer solution.
    """
    A = [list(map(int, row)) for row in A]
    m = len(A)
    n = len(A[0]) if m else 0
    H = [row[:] for row in A]
    U = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(j, k, a, b_, c, d):
        # (col_j, col_k) <- (a col_j + b col_k, c col_j + d col_k)
        for M in (H, U):
            for row in M:
                x, y = row[j], row[k]
                row[j], row[k] = a * x + b_ * y, c * x + d * y

    pivots = []
    col = 0
    for r in range(m):
        if col >= n:
            break
        for k in range(col + 1, n):
            if H[r][k] == 0:
                continue
            if H[r][col] == 0:
                colop(col, k, 0, 1, 1, 0)
                continue
            g, s, t = _ext_gcd(H[r][col], H[r][k])
            p, q = H[r][col] // g, H[r][k] // g
            colop(col, k, s, t, -q, p)
        if H[r][col] != 0:
            pivots.append((r, col))
            col += 1
    rank = col
    y = [0] * n
    for r in range(m):
        acc = b[r] - sum(H[r][j] * y[j] for j in range(rank))
        piv = next((c for (rr, c) in pivots if rr == r), None)
        if piv is None:
            if acc != 0:
                raise EmptyLattice("inconsistent mode equations")
            continue
        # entries of H[r] beyond the pivot vanish; y[piv] is still zero here
        if acc % H[r][piv]:
            raise EmptyLattice("mode equations have no integer solution")
        y[piv] = acc // H[r][piv]
    x0 = [sum(U[i][j] * y[j] for j in range(n)) for i in range(n)]
    kernel = [[U[i][j] for i in range(n)] for j in range(rank, n)]
    return x0, kernel


@dataclass(frozen=True)
class LatticeProblem:
    """Modes ``n = x0 + K y``; weights ``prod_F exp(-n_F^2 t_F / 2) * phase``."""

    incidence: np.ndarray  # (n_modes, n_edges): coefficient of theta_e in each mode's phase
    areas: np.ndarray  # (n_modes,), zero for constraint modes
    phases: np.ndarray  # (n_modes,), constraint angle phi_j (mode contributes exp(-i k phi))


def _enumerate(x0: np.ndarray, K: np.ndarray, areas: np.ndarray, radius: float) -> np.ndarray:
    """Lattice points x0 + K y with quadratic weight within ``radius`` of the minimum."""
    if K.shape[1] == 0:
        return x0[None, :]
    Kf = K * np.sqrt(areas / 2.0)[:, None]
    M = Kf.T @ Kf
    if np.linalg.matrix_rank(M) < M.shape[0]:
        raise ArithmeticError("mode lattice has a direction with no Gaussian damping; the sum diverges")
    c = -np.linalg.solve(M, Kf.T @ (x0 * np.sqrt(areas / 2.0)))
    Minv = np.linalg.inv(M)
    half = np.sqrt(radius * np.diag(Minv))
    ranges = [np.arange(math.floor(ci - hi), math.ceil(ci + hi) + 1) for ci, hi in zip(c, half)]
    size = np.prod([len(r) for r in ranges])
    if size > 5_000_000:
        raise ArithmeticError(f"lattice enumeration too large ({size} points)")
    Y = np.array(list(itertools.product(*ranges)), dtype=float)
    d = Y - c
    q = np.einsum("ni,ij,nj->n", d, M, d)
    Y = Y[q <= radius]
    return x0[None, :] + Y @ K.T


def lattice_sum(problem: LatticeProblem, exponents: np.ndarray, direction: np.ndarray | None = None,
                tolerance: float = 1e-12) -> tuple[complex, complex]:
    """Sum over mode vectors solving ``incidence^T n + exponents = 0``.

    Returns the sum and, if ``direction`` (per mode, zero on constraint
    modes) is given, its derivative along that area direction.
    """
    A = np.asarray(problem.incidence, dtype=int).T
    b = -np.asarray(exponents, dtype=int)
    try:
        x0, kern = integer_solve(A.tolist(), b.tolist())
    except EmptyLattice:
        return 0j, 0j
    x0 = np.array(x0, dtype=float)
    K = np.array(kern, dtype=float).T if kern else np.zeros((len(x0), 0))
    d = K.shape[1]
    radius = math.log(1.0 / tolerance) + 12.0 + 2.0 * d
    pts = _enumerate(x0, K, problem.areas, radius)
    expo = -0.5 * (pts ** 2) @ problem.areas
    w = np.exp(expo) * np.exp(-1j * (pts @ problem.phases))
    total = complex(np.sum(w))
    if direction is None:
        return total, 0j
    deriv = complex(np.sum(w * (-0.5 * (pts ** 2) @ np.asarray(direction, dtype=float))))
    return total, deriv


def exponent_vector(words: Sequence[Sequence[tuple[str, int]]], edge_index: Mapping[str, int]) -> np.ndarray:
    """Net exponent of each edge angle in a product of loop holonomies."""
    out = np.zeros(len(edge_index), dtype=int)
    for w in words:
        for e, s in w:
            out[edge_index[e]] += s
    return out
