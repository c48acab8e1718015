import math

import numpy as np
import pytest
from hypothesis import given

from collapse_sim.spectral import (
    SpectralResult,
    asymptotic_selection_time,
    build_stat_matrix,
    eigen_spectrum,
    evolve_distribution,
    relaxation_times,
)
from collapse_sim.walk import absorption_oracle, combined_scheme

from strategies import grid_epsilons

# frozen: slowest relaxation at eps = 0.1, tau = 1
T2_EPS_01 = 44.4981272777752


def closed_form(eps):
    # f_k(x) of degree k+1 vanishing at 0 and 1 is a left eigenvector
    M = round(1 / eps)
    k = np.arange(1, M)
    return 1.0 - k * (k + 1) * eps**2 / (1.0 - eps)


def test_columns_stochastic():
    S = build_stat_matrix(0.1)
    D = S.dense()
    np.testing.assert_allclose(D.sum(axis=0), 1.0, atol=1e-15)
    assert np.all(D >= 0.0)
    assert D[0, 0] == 1.0 and D[-1, -1] == 1.0
    assert np.count_nonzero(np.triu(D, 2)) == 0 and np.count_nonzero(np.tril(D, -2)) == 0


def test_apply_matches_dense():
    S = build_stat_matrix(0.05)
    phi = np.random.default_rng(0).random(S.dimension)
    np.testing.assert_allclose(S.apply(phi), S.dense() @ phi, atol=1e-15)


@given(grid_epsilons)
def test_eigenvalues_closed_form(eps):
    res = eigen_spectrum(build_stat_matrix(eps))
    lam = res.eigenvalues
    assert lam[0] == 1.0 and lam[1] == 1.0
    expected = np.sort(closed_form(eps))[::-1]
    np.testing.assert_allclose(lam[2:], expected, atol=1e-10)


@pytest.mark.parametrize("eps", [0.25, 0.1, 0.02])
def test_eigenvectors_biorthonormal(eps):
    S = build_stat_matrix(eps)
    res = eigen_spectrum(S)
    D = S.dense()
    L, R, lam = res.left, res.right, res.eigenvalues
    np.testing.assert_allclose(L @ R, np.eye(S.dimension), atol=1e-8)
    np.testing.assert_allclose(D @ R, R * lam, atol=1e-10)
    np.testing.assert_allclose(L @ D, lam[:, None] * L, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(R, axis=0), 1.0)


def test_selection_time_frozen():
    res = eigen_spectrum(build_stat_matrix(0.1))
    assert res.selection_time == pytest.approx(T2_EPS_01, rel=1e-12)
    # exact: lambda_2 = 1 - 2 eps^2 / (1 - eps)
    assert res.eigenvalues[2] == pytest.approx(1 - 0.02 / 0.9, abs=1e-14)


def test_ratio_approaches_one():
    ratios = []
    for eps in (0.1, 0.05, 0.02, 0.01):
        T2 = eigen_spectrum(build_stat_matrix(eps)).selection_time
        ratios.append(T2 / asymptotic_selection_time(eps))
    assert ratios == sorted(ratios)
    assert ratios[0] == pytest.approx(0.88996, abs=1e-5)
    assert abs(ratios[-1] - 1.0) < 0.011


def test_relaxation_times():
    res = SpectralResult(np.array([1.0, 1.0, 0.5, 0.0, -0.25]), tau=2.0)
    np.testing.assert_allclose(res.relaxation, [2 / math.log(2), 0.0, 2 / math.log(4)])
    np.testing.assert_allclose(relaxation_times(res, 1.0), res.relaxation / 2)
    assert SpectralResult(np.array([1.0, 1.0])).selection_time == 0.0


def test_tau_scales_times():
    S = build_stat_matrix(0.1)
    a = eigen_spectrum(S, 1.0).selection_time
    b = eigen_spectrum(S, 3.0).selection_time
    assert b == pytest.approx(3 * a)


def test_evolve_matches_oracle():
    eps = 0.1
    S = build_stat_matrix(eps)
    T2 = eigen_spectrum(S).selection_time
    phi0 = np.zeros(S.dimension)
    phi0[3] = 1.0
    phi = evolve_distribution(S, phi0, math.ceil(100 * T2))
    assert abs(phi[-1] - absorption_oracle(combined_scheme(eps), 0.3)) < 1e-3
    assert math.fsum(phi) == pytest.approx(1.0, abs=1e-12)


def test_evolve_spectral_decomposition():
    S = build_stat_matrix(0.2)
    res = eigen_spectrum(S)
    phi0 = np.full(S.dimension, 1 / S.dimension)
    t = 7
    direct = evolve_distribution(S, phi0, t)
    spectral = res.right @ (res.eigenvalues**t * (res.left @ phi0))
    np.testing.assert_allclose(direct, spectral, atol=1e-12)


@pytest.mark.parametrize(
    "phi, steps",
    [(np.full(3, 1 / 3), 1), (np.array([1.1, -0.1, 0, 0, 0, 0]), 1), (np.full(6, 0.1), 1), (np.eye(6)[0], -1)],
)
def test_evolve_validation(phi, steps):
    with pytest.raises(ValueError):
        evolve_distribution(build_stat_matrix(0.2), phi, steps)


def test_non_integer_grid_rejected():
    with pytest.raises(ValueError):
        build_stat_matrix(0.3)
