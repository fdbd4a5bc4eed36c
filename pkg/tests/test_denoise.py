import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustkc.core import KernelMatrix, ParameterError
from robustkc.denoise import (
    AdmmConfig,
    lp_denoise,
    lp_denoise_points,
    objective,
    restore_feasibility,
    sdp_denoise,
    sdp_warm_start,
)
from robustkc.kernel import gaussian_kernel

from oracles import lp_flip_certificate, lp_probe, sdp_projected_gradient


def _random_kernel(rng, n):
    Y = rng.standard_normal((n, 2)) * rng.uniform(0.5, 3)
    return gaussian_kernel(Y, rng.uniform(0.3, 2.0))


def test_lp_threshold_rule():
    K = KernelMatrix(np.array([[1.0, 0.6, 0.1], [0.6, 1.0, 0.3], [0.1, 0.3, 1.0]]), 1.0)
    X = lp_denoise(K, 0.3).dense()
    # strict inequality: the entry equal to gamma stays zero
    assert np.array_equal(X, np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=float))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_lp_optimality_certificates(n, gamma, seed):
    rng = np.random.default_rng(seed)
    K = _random_kernel(rng, n)
    X = lp_denoise(K, gamma).dense()
    assert lp_probe(K.K, gamma, X, 50, rng) <= 1e-12
    assert lp_flip_certificate(K.K, gamma, X)


def test_lp_sparse_path_equals_dense():
    rng = np.random.default_rng(7)
    Y = rng.standard_normal((90, 3))
    theta, gamma = 0.8, 0.15
    A = lp_denoise(gaussian_kernel(Y, theta), gamma).dense()
    B = lp_denoise_points(Y, theta, gamma)
    assert B.is_sparse
    assert np.array_equal(A, B.dense())


def test_gamma_validation():
    K = gaussian_kernel(np.zeros((2, 1)), 1.0)
    for g in (0.0, 1.0, -0.1):
        with pytest.raises(ParameterError):
            lp_denoise(K, g)
        with pytest.raises(ParameterError):
            sdp_denoise(K, g)


def test_sdp_block_diagonal_kernel_recovered():
    B = np.zeros((6, 6))
    B[:3, :3] = 1
    B[3:, 3:] = 1
    X, diag = sdp_denoise(KernelMatrix(B, 1.0), 0.5)
    assert np.abs(X.dense() - B).max() <= 1e-4
    assert diag.converged


def test_sdp_single_point():
    X, diag = sdp_denoise(KernelMatrix(np.ones((1, 1)), 1.0), 0.3)
    assert X.dense()[0, 0] == 1.0 and diag.converged


@pytest.mark.parametrize("seed", range(4))
def test_sdp_feasible_and_matches_reference(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(5, 16))
    K = _random_kernel(rng, n)
    gamma = float(rng.uniform(0.1, 0.6))
    X, diag = sdp_denoise(K, gamma)
    Xd = X.dense()
    assert Xd.min() >= 0 and Xd.max() <= 1
    assert np.array_equal(Xd, Xd.T)
    assert np.linalg.eigvalsh(Xd).min() >= -1e-6
    _, ref = sdp_projected_gradient(K.K, gamma)
    assert abs(diag.objective - ref) <= 1e-3 * abs(ref)
    assert diag.objective >= objective(K, gamma, sdp_warm_start(K, gamma)) - 1e-9


def test_sdp_objective_not_above_lp():
    # the LP is a relaxation of the SDP
    rng = np.random.default_rng(9)
    K = _random_kernel(rng, 12)
    lp_val = objective(K, 0.3, lp_denoise(K, 0.3))
    _, diag = sdp_denoise(K, 0.3)
    assert diag.objective <= lp_val + 1e-9


def test_admm_iteration_cap_reports_nonconvergence():
    rng = np.random.default_rng(2)
    K = _random_kernel(rng, 15)
    _, diag = sdp_denoise(K, 0.3, AdmmConfig(max_iters=2, tol_primal=1e-12, tol_dual=1e-12))
    assert diag.iterations == 2 and not diag.converged


def test_restore_feasibility():
    rng = np.random.default_rng(3)
    M = rng.uniform(-0.5, 1.5, (8, 8))
    X = restore_feasibility(M, 1e-6)
    assert X.min() >= 0 and X.max() <= 1
    assert np.linalg.eigvalsh(X).min() >= -1e-6


def test_admm_config_validation():
    with pytest.raises(ParameterError):
        AdmmConfig(rho=0)
    with pytest.raises(ParameterError):
        AdmmConfig(relaxation=2.0)
