import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ropper.errors import InputError, SingularDesignError
from ropper.model import Dataset
from ropper.variance import (nearest_neighbors, nn_split, nn_tau_estimate, nn_tau_raw,
                             reml_estimate, reml_objective, reml_objective_grid, reml_projector)
from conftest import random_dataset


def test_quadratic_term_vanishes_in_column_space(rng):
    X = np.column_stack([np.ones(12), rng.standard_normal(12)])
    d = Dataset(X @ [1.5, -2.0], rng.uniform(0.2, 2, 12), X)
    P = reml_projector(d, 0.7)
    assert abs(d.y @ P @ d.y) < 1e-12


def test_projector_annihilates_design(rng):
    d = random_dataset(rng, K=20, p=3)
    P = reml_projector(d, 1.1)
    assert np.max(np.abs(P @ d.X)) < 1e-10
    np.testing.assert_allclose(P, P.T, atol=1e-14)


def test_objective_matches_dense_formula(rng):
    d = random_dataset(rng, K=15, p=2)
    tau = 0.6
    W = np.diag(tau ** 2 + d.sigma ** 2)
    Wi = np.linalg.inv(W)
    P = Wi - Wi @ d.X @ np.linalg.inv(d.X.T @ Wi @ d.X) @ d.X.T @ Wi
    ref = np.linalg.slogdet(W)[1] + np.linalg.slogdet(d.X.T @ Wi @ d.X)[1] + d.y @ P @ d.y
    assert abs(reml_objective(d, tau) - ref) < 1e-10


@given(st.integers(3, 40), st.floats(0.05, 3), st.floats(0.05, 5), st.integers(0, 10 ** 6))
def test_one_way_closed_form(K, sigma, tau, seed):
    y = np.random.default_rng(seed).standard_normal(K)
    d = Dataset(y, np.full(K, sigma), np.ones((K, 1)))
    c = tau * tau + sigma * sigma
    ref = (K - 1) * math.log(c) + math.log(K) + np.sum((y - y.mean()) ** 2) / c
    assert abs(reml_objective(d, tau) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_objective_errors():
    X = np.column_stack([np.ones(5), np.ones(5)])
    with pytest.raises(SingularDesignError):
        reml_objective(Dataset(np.arange(5.0), np.ones(5), X), 1.0)
    with pytest.raises(InputError):
        reml_objective(Dataset([1.0, 2.0], [1.0, 1.0], np.eye(2)), 1.0)
    with pytest.raises(InputError):
        reml_objective(Dataset(np.arange(5.0), np.ones(5), np.ones((5, 1))), 0.0)


def test_estimate_matches_grid_search():
    rng = np.random.default_rng(3)
    for _ in range(100):
        d = random_dataset(rng, K=int(rng.integers(10, 40)), p=int(rng.integers(1, 4)))
        est = reml_estimate(d)
        if est.at_boundary:
            continue
        tau = est.tau
        grid = np.arange(max(tau - 0.5, 1e-4), tau + 0.5, 1e-4)
        g = grid[np.argmin(reml_objective_grid(d, grid))]
        assert abs(g - tau) <= 1e-3
        assert est.objective_value <= reml_objective(d, g) + 1e-12


def test_degenerate_truth_near_lower_bound(rng):
    X = np.column_stack([np.ones(40), rng.standard_normal(40)])
    sigma = np.full(40, 1e-3)
    y = X @ [1.0, 2.0] + sigma * rng.standard_normal(40)
    est = reml_estimate(Dataset(y, sigma, X))
    assert est.tau2 < 1e-5


def test_closed_form_interior_optimum():
    # one-way, equal sigma: REML tau^2 = S/(K-1) - sigma^2 when positive
    y = np.array([-3.0, -1.0, 0.5, 2.0, 4.5, 1.0])
    K, s = y.size, 0.5
    est = reml_estimate(Dataset(y, np.full(K, s), np.ones((K, 1))))
    ref = np.sum((y - y.mean()) ** 2) / (K - 1) - s * s
    assert abs(est.tau2 - ref) <= 1e-6 * ref


def test_bad_bounds():
    d = Dataset(np.arange(6.0), np.ones(6), np.ones((6, 1)))
    with pytest.raises(InputError):
        reml_estimate(d, bounds=(2.0, 1.0))


def _latent_replicate(rng, K, sigma2, tau2):
    x = rng.standard_normal(K)
    n = rng.integers(5, 51, K)
    sigma = np.sqrt(sigma2 / n)
    y = 1.0 + 0.5 * x + math.sqrt(tau2) * rng.standard_normal(K) + sigma * rng.standard_normal(K)
    return Dataset(y, sigma, np.column_stack([np.ones(K), x]))


def test_reml_consistent_at_k500():
    rng = np.random.default_rng(2024)
    vals = [reml_estimate(_latent_replicate(rng, 500, 2.0, 1.0)).tau2 for _ in range(200)]
    assert 0.9 <= np.mean(vals) <= 1.1


@pytest.mark.parametrize("K", [4, 5, 10, 11, 501])
def test_split_parity(K):
    test, train = nn_split(K, 7)
    assert test.size == (K // 2 if K % 2 == 0 else (K + 1) // 2)
    assert sorted(np.concatenate([test, train]).tolist()) == list(range(K))


def test_split_depends_only_on_seed():
    a, b = nn_split(30, 123), nn_split(30, 123)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(nn_split(30, 124)[0], a[0])


def test_neighbor_ties_go_to_smallest_index():
    Z = np.zeros((6, 2))
    test, train = np.array([0, 3]), np.array([1, 2, 4, 5])
    assert nearest_neighbors(Z, test, train).tolist() == [1, 1]
    Z = np.array([[0.0], [1.0], [-1.0], [5.0]])
    assert nearest_neighbors(Z, np.array([0]), np.array([1, 2, 3])).tolist() == [1]


def test_neighbor_matches_brute_force(rng):
    Z = rng.standard_normal((30, 3))
    test, train = nn_split(30, 1)
    nbr = nearest_neighbors(Z, test, train)
    for t, j in zip(test, nbr):
        dists = [float((Z[t] - Z[k]) @ (Z[t] - Z[k])) for k in train]
        assert j == train[int(np.argmin(dists))]


def test_constant_y_zero_sigma_gives_zero():
    d = Dataset(np.full(10, 3.0), np.zeros(10), np.column_stack([np.ones(10), np.arange(10.0)]))
    assert nn_tau_raw(d, 0) == 0.0
    est = nn_tau_estimate(d, 0)
    assert est.method == "nn" and est.tau2 == 0.0


def test_raw_value_formula(rng):
    d = random_dataset(rng, K=21, p=2)
    test, train = nn_split(21, 9)
    nbr = nearest_neighbors(d.X, test, train)
    ref = (np.sum(d.y ** 2) / 21 - sum(d.y[t] * d.y[j] for t, j in zip(test, nbr)) / test.size
           - np.sum(d.sigma[test] ** 2) / test.size)
    assert abs(nn_tau_raw(d, 9) - ref) < 1e-12


def test_fallback_to_reml(rng):
    K = 30
    X = np.column_stack([np.ones(K), rng.standard_normal(K)])
    d = Dataset(0.01 * rng.standard_normal(K), np.ones(K), X)
    est = nn_tau_estimate(d, 0)
    assert est.raw_nn < 0
    assert est.method == "nn_fell_back_to_reml"
    assert est.tau2 == reml_estimate(d).tau2


@given(st.integers(0, 10 ** 6))
def test_nn_never_negative(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, K=int(rng.integers(4, 30)), p=2, tau=float(rng.uniform(0, 1)))
    est = nn_tau_estimate(d, seed)
    assert est.tau2 >= 0
    if est.method == "nn":
        assert est.raw_nn >= 0


def test_nn_needs_four_units():
    with pytest.raises(InputError):
        nn_tau_estimate(Dataset([1.0, 2.0, 3.0], [1.0] * 3, np.ones((3, 1))), 0)


def test_standardize_changes_metric_only():
    X = np.column_stack([np.ones(8), np.arange(8.0), 1000.0 * np.array([0, 1, 0, 1, 0, 1, 0, 1])])
    d = Dataset(np.arange(8.0), np.full(8, 0.1), X)
    assert nn_tau_raw(d, 0, standardize=False) != nn_tau_raw(d, 0, standardize=True)
    d_scaled = Dataset(d.y, d.sigma, X * [1.0, 1.0, 1e-3])
    assert nn_tau_raw(d, 0, standardize=True) == nn_tau_raw(d_scaled, 0, standardize=True)
