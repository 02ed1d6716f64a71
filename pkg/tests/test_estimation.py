import math

import numpy as np
import pytest

from ising_assortment import Domain, IsingModel, log_partition, spin_to_binary
from ising_assortment.errors import (
    DegenerateColumn,
    InnerSolveFailed,
    MomentOutOfRange,
    SingularSigma,
    WrongDomain,
)
from ising_assortment.estimation import (
    Moments,
    TransactionSample,
    _sigma_diag,
    compute_moments,
    dc_estimate,
    log_partition_upper_bound,
    moments_from_model,
    neg_mean_log_likelihood,
    solve_bound,
    sparse_mle_estimate,
)
from ising_assortment.sampling import SamplerConfig, sample_baskets

from conftest import oracle_distribution, random_spin_model


def moments_of(mu, c) -> Moments:
    mu = np.asarray(mu, dtype=float)
    c = np.asarray(c, dtype=float)
    s = c + np.outer(mu, mu)
    return Moments(mu, s, c, 0)


def test_transaction_sample_validation():
    with pytest.raises(ValueError):
        TransactionSample(np.array([[0, 1]]))
    with pytest.raises(ValueError):
        TransactionSample(np.zeros((0, 2)))
    t = TransactionSample.from_binary([[1, 0], [0, 1]])
    assert t.m == 2 and t.n == 2
    assert t.baskets.tolist() == [[1, -1], [-1, 1]]


def test_moments_hand_examples():
    m = compute_moments(TransactionSample(np.array([[1, 1], [-1, -1]])))
    assert np.allclose(m.mu, 0)
    assert np.allclose(m.s, [[1, 1], [1, 1]])
    assert np.allclose(m.c, m.s)
    all4 = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    m = compute_moments(TransactionSample(all4))
    assert np.allclose(m.mu, 0) and np.allclose(m.c, np.eye(2))


def test_moments_invariants():
    rng = np.random.default_rng(0)
    data = TransactionSample(rng.choice([-1, 1], size=(500, 4)))
    m = compute_moments(data)
    assert np.array_equal(m.s, m.s.T)
    assert np.all(np.diag(m.s) == 1.0)
    assert np.allclose(np.diag(m.c), 1 - m.mu**2, atol=1e-12)
    assert np.allclose(m.c, m.s - np.outer(m.mu, m.mu), atol=1e-12)


def test_degenerate_column():
    with pytest.raises(DegenerateColumn):
        compute_moments(TransactionSample(np.array([[1, 1], [1, -1]])))


def test_sampled_moments_match_exact():
    spin = random_spin_model(np.random.default_rng(4), 5, scale=0.4)
    exact = moments_from_model(spin)
    b = sample_baskets(spin_to_binary(spin), range(5), SamplerConfig(n_samples=100_000, thinning=5, seed=1))
    emp = compute_moments(TransactionSample.from_binary(b.baskets))
    se_mu = np.sqrt((1 - exact.mu**2) / emp.m)
    assert np.all(np.abs(emp.mu - exact.mu) < 3 * se_mu)
    se_s = np.sqrt(np.maximum(1 - exact.s**2, 1e-12) / emp.m)
    assert np.all(np.abs(emp.s - exact.s) < 3 * se_s + 1e-12)


def test_exact_moments_match_oracle():
    spin = random_spin_model(np.random.default_rng(6), 3)
    dist = oracle_distribution(spin.theta, [0, 1, 2], Domain.SPIN)
    mu = np.array([sum(p * x[i] for x, p in dist.items()) for i in range(3)])
    assert np.allclose(moments_from_model(spin).mu, mu, atol=1e-12)


def test_likelihood_at_zero():
    m = moments_of([0.2, -0.1, 0.4], np.eye(3) * 0.9)
    val = neg_mean_log_likelihood(IsingModel(np.zeros((3, 3)), Domain.SPIN), m)
    assert val == pytest.approx(3 * math.log(2))


def test_likelihood_definition_on_repeated_basket():
    spin = random_spin_model(np.random.default_rng(8), 3)
    basket = np.array([[1, -1, 1]] * 4)
    moments = Moments(basket[0].astype(float), np.outer(basket[0], basket[0]).astype(float), np.zeros((3, 3)), 4)
    p = oracle_distribution(spin.theta, [0, 1, 2], Domain.SPIN)[(1, -1, 1)]
    assert neg_mean_log_likelihood(spin, moments) == pytest.approx(-math.log(p), abs=1e-12)


def test_likelihood_prefers_the_truth():
    truth = random_spin_model(np.random.default_rng(10), 4, scale=0.5)
    b = sample_baskets(spin_to_binary(truth), range(4), SamplerConfig(n_samples=100_000, seed=2))
    mom = compute_moments(TransactionSample.from_binary(b.baskets))
    zero = IsingModel(np.zeros((4, 4)), Domain.SPIN)
    assert neg_mean_log_likelihood(truth, mom) <= neg_mean_log_likelihood(zero, mom)


def test_likelihood_requires_spin():
    with pytest.raises(WrongDomain):
        neg_mean_log_likelihood(IsingModel(np.zeros((2, 2))), moments_of([0, 0], np.eye(2)))


def test_sigma_diagonal_series_is_continuous():
    eps = 1e-6
    below = _sigma_diag(np.array([eps * (1 - 1e-9)]))[0]
    above = _sigma_diag(np.array([eps * (1 + 1e-9)]))[0]
    assert below == pytest.approx(above, abs=1e-14)
    assert _sigma_diag(np.array([0.0]))[0] == 1.0
    assert _sigma_diag(np.array([0.5]))[0] == pytest.approx(0.5 / math.atanh(0.5))


def test_dc_independent_data_has_no_couplings():
    mu = np.array([0.3, -0.2, 0.5, 0.0])
    est = dc_estimate(moments_of(mu, np.diag(1 - mu**2)))
    off = ~np.eye(4, dtype=bool)
    assert np.allclose(est.theta[off], 0.0, atol=1e-12)
    assert np.allclose(np.diag(est.theta), np.arctanh(mu), atol=1e-12)


def test_dc_symmetric_point():
    est = dc_estimate(moments_of(np.zeros(3), np.eye(3)))
    assert np.allclose(est.theta, 0.0, atol=1e-14)


def test_dc_is_exact_for_two_products():
    truth = IsingModel([[0.3, -0.4], [-0.4, -0.2]], Domain.SPIN)
    est = dc_estimate(moments_from_model(truth))
    assert np.allclose(est.theta, truth.theta, atol=1e-10)


def test_dc_symmetry_and_equivariance():
    truth = random_spin_model(np.random.default_rng(12), 5, scale=0.3)
    mom = moments_from_model(truth)
    est = dc_estimate(mom)
    assert np.array_equal(est.theta, est.theta.T)
    perm = np.array([3, 0, 4, 1, 2])
    est_p = dc_estimate(mom.permuted(perm))
    assert np.allclose(est_p.theta, est.theta[np.ix_(perm, perm)], atol=1e-12)


def test_dc_output_is_a_usable_choice_model():
    est = dc_estimate(moments_from_model(random_spin_model(np.random.default_rng(13), 5, 0.3)))
    assert math.isfinite(log_partition(spin_to_binary(est), range(5)))


def test_dc_rejects_out_of_range_moments():
    with pytest.raises(MomentOutOfRange):
        dc_estimate(moments_of([1.0, 0.0], np.eye(2)))
    # covariance too strong for the means: a pair probability would be negative
    with pytest.raises(MomentOutOfRange, match=r"pair \((0, 1|1, 0)\)"):
        dc_estimate(moments_of([0.9, -0.9], [[0.19, 0.5], [0.5, 0.19]]))


def test_dc_rejects_singular_sigma():
    c = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises((SingularSigma, MomentOutOfRange)):
        dc_estimate(moments_of([0.0, 0.0], c))
    # rows summing to zero: Sigma has a zero eigenvalue
    c3 = np.full((3, 3), -0.5) + 1.5 * np.eye(3)
    with pytest.raises(SingularSigma):
        dc_estimate(moments_of([0.0, 0.0, 0.0], c3))


def test_dc_clips_extreme_means():
    with pytest.warns(UserWarning, match="clipping"):
        est = dc_estimate(moments_of([1 - 1e-10], [[1 - (1 - 1e-10) ** 2]]))
    assert math.isfinite(est.theta[0, 0])


def test_bound_at_zero():
    for n in (1, 3, 6):
        val = log_partition_upper_bound(IsingModel(np.zeros((n, n)), Domain.SPIN))
        assert val >= n * math.log(2) - 1e-6


def test_bound_dominates_exact_value():
    rng = np.random.default_rng(14)
    for _ in range(20):
        n = int(rng.integers(1, 9))
        m = random_spin_model(rng, n, scale=float(rng.uniform(0.1, 2.0)))
        assert log_partition_upper_bound(m) >= log_partition(m, range(n)) - 1e-6


def test_bound_solution_is_stationary():
    m = random_spin_model(np.random.default_rng(15), 5)
    sol = solve_bound(m.theta, tol=1e-10)
    assert sol.grad_norm <= 1e-10
    w = sol.w
    q = np.r_[1.0, np.full(5, 4.0 / 3.0)]
    assert np.allclose(np.diag(w), q, atol=1e-9)


def test_bound_gradient_matches_finite_differences():
    m = random_spin_model(np.random.default_rng(16), 4).theta
    sol = solve_bound(m, tol=1e-12)
    h = 1e-6
    t = m.copy()
    t[1, 1] += h
    up = solve_bound(t, tol=1e-12).value
    t[1, 1] -= 2 * h
    down = solve_bound(t, tol=1e-12).value
    assert (up - down) / (2 * h) == pytest.approx(sol.w[0, 2], abs=1e-6)
    t = m.copy()
    t[0, 2] += h
    t[2, 0] += h
    up = solve_bound(t, tol=1e-12).value
    t[0, 2] -= 2 * h
    t[2, 0] -= 2 * h
    down = solve_bound(t, tol=1e-12).value
    assert (up - down) / (2 * h) == pytest.approx(2 * sol.w[1, 3], abs=1e-6)


def test_bound_iteration_cap():
    m = random_spin_model(np.random.default_rng(17), 6, scale=2.0)
    with pytest.raises(InnerSolveFailed):
        solve_bound(m.theta, tol=1e-14, max_iter=1)


def test_sparse_mle_large_penalty_decouples():
    mu = np.array([0.3, -0.5, 0.1])
    truth_c = np.array([[0.91, 0.2, 0.1], [0.2, 0.75, -0.1], [0.1, -0.1, 0.99]])
    res = sparse_mle_estimate(moments_of(mu, truth_c), rho=100.0)
    assert res.converged
    off = ~np.eye(3, dtype=bool)
    assert np.all(res.model.theta[off] == 0.0)
    d = np.diag(res.model.theta)
    # single-spin optimum arctanh(mu), up to the looseness of the bound
    assert np.all(np.sign(d) == np.sign(mu))
    assert np.allclose(d, np.arctanh(mu), atol=0.1)


def test_sparse_mle_unpenalized_on_independent_data():
    res = sparse_mle_estimate(moments_of(np.zeros(4), np.eye(4)), rho=0.0)
    off = ~np.eye(4, dtype=bool)
    assert np.all(np.abs(res.model.theta[off]) < 0.05)


def test_sparse_mle_path_and_descent():
    truth = random_spin_model(np.random.default_rng(18), 5, scale=0.5)
    mom = moments_from_model(truth)
    counts = []
    iu = np.triu_indices(5, 1)
    for rho in (0.0, 0.015, 0.05, 0.2, 10.0):
        res = sparse_mle_estimate(mom, rho=rho)
        assert res.converged
        h = np.array(res.history)
        assert np.all(np.diff(h) <= 1e-9)
        counts.append(int(np.count_nonzero(res.model.theta[iu])))
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == 0


def test_sparse_mle_equivariance():
    truth = random_spin_model(np.random.default_rng(19), 4, scale=0.5)
    mom = moments_from_model(truth)
    perm = np.array([2, 0, 3, 1])
    a = sparse_mle_estimate(mom, rho=0.015).model.theta
    b = sparse_mle_estimate(mom.permuted(perm), rho=0.015).model.theta
    assert np.allclose(b, a[np.ix_(perm, perm)], atol=1e-4)


def test_sparse_mle_flags_nonconvergence():
    mom = moments_from_model(random_spin_model(np.random.default_rng(20), 4))
    with pytest.warns(UserWarning, match="did not converge"):
        res = sparse_mle_estimate(mom, rho=0.01, max_iter=2)
    assert not res.converged


def test_sparse_mle_rejects_negative_penalty():
    with pytest.raises(ValueError):
        sparse_mle_estimate(moments_of([0.0], [[1.0]]), rho=-1.0)
