import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from robustkc.core import DegenerateDataError, InputError, ParameterError
from robustkc.denoise import lp_denoise
from robustkc.kernel import (
    ParamConfig,
    chi2_quantile,
    gaussian_kernel,
    neighbor_quantiles,
    quantile_sorted,
    radius_graph,
    select_gamma,
    select_theta,
    truncated_kernel,
)
from robustkc.synth import preset

from oracles import chi2_quantile_bisect, kernel_loop, neighbor_quantiles_loop, sort_quantile

points = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 4)), elements=st.floats(-20, 20))


def test_kernel_matches_scalar_loop():
    Y = np.random.default_rng(0).standard_normal((15, 3)) * 2
    for theta in (0.3, 1.0, 4.0):
        assert np.allclose(gaussian_kernel(Y, theta).K, kernel_loop(Y, theta), rtol=0, atol=1e-14)


def test_kernel_identical_points_and_errors():
    assert np.array_equal(gaussian_kernel([[0.0, 0.0], [0.0, 0.0]], 0.7).K, np.ones((2, 2)))
    with pytest.raises(ParameterError):
        gaussian_kernel([[0.0], [1.0]], 0.0)
    with pytest.raises(InputError):
        gaussian_kernel([[0.0], [np.nan]], 1.0)


def test_kernel_known_value():
    K = gaussian_kernel([[0.0, 0.0], [3.0, 4.0]], 5.0).K
    assert K[0, 1] == pytest.approx(math.exp(-0.5))


@settings(max_examples=50, deadline=None)
@given(points, st.floats(0.1, 10))
def test_kernel_properties(Y, theta):
    K = gaussian_kernel(Y, theta).K
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)
    assert np.all((K >= 0) & (K <= 1))
    # scaling data and theta together leaves K unchanged
    assert np.allclose(gaussian_kernel(3.0 * Y, 3.0 * theta).K, K, atol=1e-12)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(0, 1))
def test_quantile_sorted_matches_oracle(vals, p):
    s = np.sort(vals)
    assert quantile_sorted(s, p) == pytest.approx(sort_quantile(vals, p), abs=1e-9)
    assert quantile_sorted(s, p) == pytest.approx(np.quantile(s, p), abs=1e-9)


def test_neighbor_quantiles_exclude_self():
    Y = np.random.default_rng(1).standard_normal((40, 2))
    for beta in (0.06, 0.5, 0.95):
        assert np.allclose(neighbor_quantiles(Y, beta), neighbor_quantiles_loop(Y, beta), atol=1e-12)
    # blocked evaluation gives the same answer
    assert np.allclose(neighbor_quantiles(Y, 0.3, block=7), neighbor_quantiles_loop(Y, 0.3), atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 10, 50])
@pytest.mark.parametrize("p", [0.5, 0.8, 0.95])
def test_chi2_quantile_against_incomplete_gamma(d, p):
    assert chi2_quantile(p, d) == pytest.approx(chi2_quantile_bisect(p, d), rel=1e-10)


def test_gamma_equals_alpha_in_two_dimensions():
    # chi2 with 2 dof is exponential(1/2): t = -2 log(alpha)
    for a in (0.05, 0.2, 0.5):
        assert select_gamma(2, a) == pytest.approx(a, rel=1e-12)
    with pytest.raises(ParameterError):
        select_gamma(2, 1.0)


def test_select_theta_formula():
    Y = np.random.default_rng(2).standard_normal((60, 3))
    q = neighbor_quantiles_loop(Y, 0.06)
    expected = sort_quantile(q, 0.8) / math.sqrt(chi2_quantile_bisect(0.8, 3))
    assert select_theta(Y) == pytest.approx(expected, rel=1e-10)


def test_select_theta_degenerate():
    with pytest.raises(DegenerateDataError):
        select_theta(np.zeros((5, 2)))
    with pytest.raises(ParameterError):
        select_theta(np.zeros((1, 2)))


def test_select_theta_on_table1_is_positive_and_scales():
    Y = preset("table1-balanced", 0).data.points
    t = select_theta(Y, ParamConfig())
    assert t > 0
    assert select_theta(2 * Y) == pytest.approx(2 * t, rel=1e-12)


def test_param_config_validation():
    with pytest.raises(ParameterError):
        ParamConfig(alpha=0.0)
    with pytest.raises(ParameterError):
        ParamConfig(beta=1.0)
    with pytest.raises(ParameterError):
        ParamConfig(theta_override=-1.0)


def test_radius_graph_matches_dense_lp():
    Y = np.random.default_rng(4).standard_normal((120, 2)) * 3
    theta, gamma = 0.9, 0.2
    dense = lp_denoise(gaussian_kernel(Y, theta), gamma).dense()
    sparse = radius_graph(Y, -2 * theta**2 * math.log(gamma), block=17).toarray()
    assert np.array_equal(dense, sparse)


def test_truncated_kernel_close_to_dense():
    Y = np.random.default_rng(5).standard_normal((80, 2)) * 4
    K = gaussian_kernel(Y, 1.0).K
    T = truncated_kernel(Y, 1.0, cutoff=1e-8).toarray()
    assert np.abs(K - T).max() <= 1e-8
