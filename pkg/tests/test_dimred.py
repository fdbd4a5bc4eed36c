import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustkc.core import InputError, ParameterError
from robustkc.dimred import fit_projection, project
from robustkc.synth import gen_simplex


def test_split_sizes_and_disjointness():
    Y = np.random.default_rng(0).standard_normal((100, 6))
    proj = fit_projection(Y, r=4, alpha_split=0.5, seed=1)
    assert proj.p2_indices.size == 10 and proj.p1_indices.size == 90
    assert not set(proj.p1_indices) & set(proj.p2_indices)
    assert proj.dim == 3
    assert np.allclose(proj.basis.T @ proj.basis, np.eye(3), atol=1e-12)
    Z, rows = project(Y, proj)
    assert Z.N == 90 and Z.d == 3 and np.array_equal(rows, proj.p1_indices)


def test_fitting_subset_at_least_r():
    Y = np.random.default_rng(0).standard_normal((30, 12))
    proj = fit_projection(Y, r=10, alpha_split=0.3, seed=0)
    assert proj.p2_indices.size == 10


def test_identity_when_dimension_small():
    Y = np.random.default_rng(0).standard_normal((20, 2))
    proj = fit_projection(Y, r=5)
    assert proj.identity and proj.p1_indices.size == 20


def test_determinism_and_seed_dependence():
    Y = np.random.default_rng(0).standard_normal((50, 5))
    a = fit_projection(Y, 3, seed=4)
    b = fit_projection(Y, 3, seed=4)
    c = fit_projection(Y, 3, seed=5)
    assert np.array_equal(a.basis, b.basis) and np.array_equal(a.p2_indices, b.p2_indices)
    assert not np.array_equal(a.p2_indices, c.p2_indices)


def test_practical_mode_uses_all_points():
    Y = np.random.default_rng(0).standard_normal((50, 5))
    proj = fit_projection(Y, 3, strict=False)
    assert proj.p1_indices.size == 50 and proj.p2_indices.size == 0


def test_errors():
    Y = np.random.default_rng(0).standard_normal((10, 5))
    with pytest.raises(ParameterError):
        fit_projection(Y, 1)
    with pytest.raises(ParameterError):
        fit_projection(Y, 3, alpha_split=1.0)
    with pytest.raises(ParameterError):
        fit_projection(Y[:4], 4, alpha_split=0.9)
    proj = fit_projection(Y, 3)
    with pytest.raises(InputError):
        project(np.zeros((3, 4)), proj)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6), st.booleans())
def test_projection_is_non_expansive(r, seed, strict):
    rng = np.random.default_rng(seed)
    d = r + int(rng.integers(0, 5))
    Y = rng.standard_normal((40, d)) * rng.uniform(0.1, 10)
    proj = fit_projection(Y, r, seed=seed, strict=strict)
    Z, rows = project(Y, proj)
    X = Y[rows]
    i, j = rng.integers(0, len(rows), (2, 50))
    before = np.linalg.norm(X[i] - X[j], axis=1)
    after = np.linalg.norm(Z.points[i] - Z.points[j], axis=1)
    assert np.all(after <= before * (1 + 1e-12) + 1e-12)


def test_simplex_separation_preserved_typical():
    ds = gen_simplex(4, 5.0, 200, 0, seed=0, d=50)
    proj = fit_projection(ds.data, 4, seed=0)
    means = ds.spec.means @ proj.basis
    diff = means[:, None] - means[None]
    dist = np.sqrt((diff**2).sum(-1))[np.triu_indices(4, 1)]
    assert dist.min() >= ds.spec.delta_min / 2
