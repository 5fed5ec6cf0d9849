import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ymsurf.heatkernel import (
    HKParams,
    TruncationError,
    casimir,
    character,
    choose_cutoff,
    heat_kernel_table,
    hk_density,
    hk_dt,
    hk_sample,
    tail_bound,
    weyl_dim,
)
from ymsurf.unitary import expm_skew, haar_sample, lie_basis, normalized_trace


def _casimir_oracle(lam, N, h=1e-3):
    """-sum_X d^2/ds^2 chi(e^{sX}) / dim at s=0, by central differences."""
    d = weyl_dim(lam)
    total = 0.0
    for X in lie_basis(N):
        f = lambda s: character(lam, expm_skew(s * X)).real  # noqa: E731
        total += (f(h) - 2 * f(0.0) + f(-h)) / (h * h)
    return -total / d


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_casimir_small_weights(N):
    assert casimir((0,) * N) == 0
    assert casimir((1,) + (0,) * (N - 1)) == pytest.approx(1.0)
    assert casimir((1,) * N) == pytest.approx(1.0)


@pytest.mark.parametrize("lam", [(1, 0), (1, 1), (2, 0), (2, -1), (3, 1, 0), (1, 0, -2)])
def test_casimir_matches_laplacian(lam):
    assert casimir(lam) == pytest.approx(_casimir_oracle(lam, len(lam)), rel=1e-4)


def test_u1_casimir_is_square():
    for n in range(-4, 5):
        assert casimir((n,)) == n * n


def test_casimir_monotone():
    for lam in [(0, 0), (2, 1), (3, 0, 0), (4, 2, 1)]:
        up = (lam[0] + 1,) + lam[1:]
        assert casimir(up) > casimir(lam)


def test_weyl_dim():
    assert weyl_dim((0, 0, 0)) == 1
    for N in range(1, 6):
        assert weyl_dim((1,) + (0,) * (N - 1)) == N
    assert weyl_dim((2, 0)) == 3
    assert weyl_dim((2, 1, 0)) == 8


def test_character_defining_and_det(rng):
    U = haar_sample(2, rng)
    assert character((1, 0), U) == pytest.approx(np.trace(U))
    assert character((1, 1), U) == pytest.approx(np.linalg.det(U))
    assert character((2, 0), np.eye(2)) == pytest.approx(3)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_character_class_function(N, seed):
    rng = np.random.default_rng(seed)
    U, V = haar_sample(N, rng, 2)
    lam = (3, 1, 0)[:N] if N == 3 else (2, -1)
    a = character(lam, U)
    assert abs(character(lam, V @ U @ V.conj().T) - a) < 1e-10
    assert abs(a) <= weyl_dim(lam) + 1e-9


def test_character_near_degenerate_eigenvalues():
    # two eigenvalues 1e-8 apart: bialternant is ill-conditioned, fallback must agree with the limit
    U = np.diag(np.exp(1j * np.array([0.3, 0.3 + 1e-8, -1.0])))
    V = np.diag(np.exp(1j * np.array([0.3, 0.3, -1.0])))
    for lam in [(2, 1, 0), (3, 0, -1)]:
        assert abs(character(lam, U) - character(lam, V)) < 1e-6


def test_density_u1_series():
    ref = sum(math.exp(-n * n) for n in range(-10, 11))
    assert hk_density(2.0, np.eye(1)) == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(1.772637, abs=1e-6)


def test_density_large_time_is_haar(rng):
    for U in haar_sample(1, rng, 5):
        assert abs(hk_density(50.0, U) - 1) < 1e-9
    assert abs(hk_dt(60.0, np.eye(3))) < 1e-9


def test_dt_u1_series():
    ref = -sum(0.5 * n * n * math.exp(-n * n) for n in range(-10, 11))
    assert hk_dt(2.0, np.eye(1)) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_dt_matches_finite_differences(N, rng):
    for U in haar_sample(N, rng, 4):
        t, h = 0.7, 1e-4
        fd = (hk_density(t + h, U) - hk_density(t - h, U)) / (2 * h)
        assert abs(hk_dt(t, U) - fd) < 1e-6


@pytest.mark.parametrize("N", [2, 3])
def test_density_symmetries(N, rng):
    U, V = haar_sample(N, rng, 2)
    r = hk_density(0.8, U)
    assert abs(hk_density(0.8, U.conj().T) - r) < 1e-10
    assert abs(hk_density(0.8, V @ U @ V.conj().T) - r) < 1e-10


def test_density_positive(rng):
    for N in (1, 2, 3):
        U = haar_sample(N, rng, 300)
        for t in (0.1, 0.3, 2.0):
            # the kernel is positive; the summed series may dip below zero by the
            # truncation tolerance plus roundoff relative to its peak at the identity
            peak = hk_density(t, np.eye(N))
            assert np.all(hk_density(t, U) > -(1e-12 + 1e-14 * peak))


def test_haar_average_of_density_n2(rng):
    U = haar_sample(2, rng, 100_000)
    r = hk_density(1.0, U)
    assert abs(r.mean() - 1) < 3 * r.std() / math.sqrt(len(r))


def test_truncation_contract():
    for N in (1, 2, 3):
        for t in (0.1, 1.0, 4.0):
            L = choose_cutoff(N, t, 1e-12)
            assert tail_bound(N, t, L) < 1e-12
            if L > 1:
                assert tail_bound(N, t, L - 1) >= 1e-12
    with pytest.raises(TruncationError):
        heat_kernel_table(2, 0.5, HKParams(cutoff=1))


def test_cutoff_change_is_below_tolerance(rng):
    U = haar_sample(2, rng, 20)
    auto = heat_kernel_table(2, 0.5)
    big = heat_kernel_table(2, 0.5, HKParams(cutoff=auto.cutoff + 6))
    assert np.abs(auto.density(U) - big.density(U)).max() < 1e-11


def test_sample_short_time_near_identity(rng):
    B = hk_sample(1e-6, 3, rng=rng, size=10)
    assert np.abs(B - np.eye(3)).max() < 1e-2


@pytest.mark.parametrize("N", [1, 2, 3])
def test_sample_trace_mean(N, rng):
    B = hk_sample(1.0, N, HKParams(brownian_step=0.01), rng, 20_000)
    tr = normalized_trace(B)
    se = math.sqrt((tr.real.var() + tr.imag.var()) / len(tr))
    assert abs(tr.mean() - math.exp(-0.5)) < 3 * se


def test_sample_long_time_matches_haar(rng):
    B = hk_sample(50.0, 2, HKParams(brownian_step=0.05), rng, 20_000)
    H = haar_sample(2, rng, 20_000)
    for f in (lambda U: np.abs(np.trace(U, axis1=1, axis2=2)) ** 2, lambda U: np.trace(U, axis1=1, axis2=2).real):
        a, b = f(B), f(H)
        se = math.sqrt(a.var() / len(a) + b.var() / len(b))
        assert abs(a.mean() - b.mean()) < 3 * se


def test_params_validation():
    with pytest.raises(ValueError):
        HKParams(tolerance=2.0)
    with pytest.raises(ValueError):
        hk_density(0.0, np.eye(2))
