import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ising_assortment import (
    Domain,
    Instance,
    IsingModel,
    basket_distribution,
    basket_probability,
    binary_to_spin,
    conditional_marginal,
    expected_profit_exact,
    log_partition,
    marginal_probabilities,
    marginal_probability,
    spin_to_binary,
)
from ising_assortment.errors import (
    AssortmentTooLarge,
    DimensionMismatch,
    ProductNotOffered,
    WrongDomain,
)

from conftest import (
    EXAMPLE1_THETA,
    oracle_distribution,
    oracle_profit,
    oracle_weights,
    random_binary_model,
    random_spin_model,
)

# Frozen from /root/oracles/example1.py (plain-Python enumeration).
LOGZ_ALL = 16.315096923500445
LOGZ_23 = 5.6998625290490637
R_ALL = 47.008478085797357
R_23 = 55.000000000000007
R_13 = 109.91586664593623
P_23_11 = 0.0033464254621424277
MARGINAL_3_OF_ALL = 0.27026936311991973
COND_2_GIVEN_1 = 0.99819094194669289


def test_model_is_symmetrized_with_warning():
    with pytest.warns(UserWarning):
        m = IsingModel([[0.0, 1.0], [0.0, 0.0]])
    assert np.array_equal(m.theta, [[0.0, 0.5], [0.5, 0.0]])


def test_model_rejects_nonfinite_and_nonsquare():
    with pytest.raises(ValueError):
        IsingModel([[np.nan]])
    with pytest.raises(ValueError):
        IsingModel(np.zeros((2, 3)))


def test_theta_is_read_only():
    m = IsingModel(np.eye(2))
    with pytest.raises(ValueError):
        m.theta[0, 0] = 3.0


def test_instance_requires_binary_domain():
    with pytest.raises(WrongDomain):
        Instance(IsingModel(np.eye(2), Domain.SPIN), [1.0, 1.0])


def test_log_partition_small_cases():
    m = IsingModel([[0.0]])
    assert log_partition(m, [0]) == pytest.approx(math.log(2), abs=1e-15)
    assert log_partition(m, []) == 0.0


def test_log_partition_example1(example1):
    assert log_partition(example1.model, [0, 1, 2]) == pytest.approx(LOGZ_ALL, abs=1e-12)
    assert log_partition(example1.model, [1, 2]) == pytest.approx(LOGZ_23, abs=1e-12)


def test_log_partition_limit():
    m = IsingModel(np.zeros((4, 4)))
    with pytest.raises(AssortmentTooLarge):
        log_partition(m, range(4), limit=3)
    assert log_partition(m, range(4), limit=4) == pytest.approx(4 * math.log(2))


def test_log_partition_survives_large_parameters():
    m = IsingModel(np.full((12, 12), 10.0))
    val = log_partition(m, range(12))
    assert math.isfinite(val)
    assert val == pytest.approx(12 * 10 + 12 * 11 * 10, rel=1e-12)


def test_basket_probability_small_cases(example1):
    assert basket_probability(IsingModel([[0.0]]), [0], [1]) == pytest.approx(0.5)
    z = IsingModel(np.zeros((2, 2)))
    for x in ([0, 0], [0, 1], [1, 0], [1, 1]):
        assert basket_probability(z, [0, 1], x) == pytest.approx(0.25)
    assert basket_probability(example1.model, [1, 2], [1, 1]) == pytest.approx(P_23_11, rel=1e-12)


def test_basket_probability_rejects_bad_basket(example1):
    with pytest.raises(DimensionMismatch):
        basket_probability(example1.model, [0, 1], [1])
    with pytest.raises(DimensionMismatch):
        basket_probability(example1.model, [0, 1], [1, -1])


def test_distribution_matches_oracle_and_normalizes():
    rng = np.random.default_rng(3)
    for n in (1, 3, 5):
        m = random_binary_model(rng, n)
        xs, p = basket_distribution(m, range(n))
        ref = oracle_distribution(m.theta, list(range(n)))
        for row, prob in zip(xs, p):
            assert prob == pytest.approx(ref[tuple(row)], rel=1e-10)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_normalization_property(seed, n):
    m = random_binary_model(np.random.default_rng(seed), n, off=2.0, diag=3.0)
    _, p = basket_distribution(m, range(n))
    assert abs(p.sum() - 1.0) <= 1e-12


def test_marginals(example1):
    assert marginal_probability(IsingModel([[0.0]]), [0], 0) == pytest.approx(0.5)
    assert marginal_probability(example1.model, [0, 1, 2], 2) == pytest.approx(
        MARGINAL_3_OF_ALL, rel=1e-12
    )
    with pytest.raises(ProductNotOffered):
        marginal_probability(example1.model, [0, 1], 2)


def test_isolated_product_marginal_is_sigmoid():
    rng = np.random.default_rng(5)
    m = random_binary_model(rng, 5).theta.copy()
    m[2, :] = m[:, 2] = 0.0
    m[2, 2] = 0.7
    model = IsingModel(m)
    for s in ([2], [0, 2], [0, 1, 2, 3, 4]):
        assert marginal_probability(model, s, 2) == pytest.approx(1 / (1 + math.exp(-0.7)), abs=1e-12)


def test_conditional_marginal_example1(example1):
    val = conditional_marginal(example1.model, [0, 1, 2], 1, 0, 1)
    assert val == pytest.approx(COND_2_GIVEN_1, rel=1e-12)


def test_conditional_marginal_matches_oracle_ratio():
    rng = np.random.default_rng(8)
    m = random_binary_model(rng, 5)
    s = [0, 1, 2, 3, 4]
    dist = oracle_distribution(m.theta, s)
    for kv in (0, 1):
        num = sum(p for x, p in dist.items() if x[3] == 1 and x[1] == kv)
        den = sum(p for x, p in dist.items() if x[1] == kv)
        assert conditional_marginal(m, s, 3, 1, kv) == pytest.approx(num / den, rel=1e-10)


def test_removal_identity():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        m = random_binary_model(rng, n, off=2.0)
        s = list(range(n))
        l, k = rng.choice(n, 2, replace=False)
        lhs = conditional_marginal(m, s, int(l), int(k), 0)
        rhs = marginal_probability(m, [i for i in s if i != k], int(l))
        assert abs(lhs - rhs) <= 1e-12


def test_conditioning_without_coupling_is_marginal():
    m = IsingModel([[0.3, 0.0], [0.0, -1.2]])
    base = marginal_probability(m, [0, 1], 0)
    for kv in (0, 1):
        assert conditional_marginal(m, [0, 1], 0, 1, kv) == pytest.approx(base, abs=1e-14)


def test_conditional_marginal_errors(example1):
    with pytest.raises(DimensionMismatch):
        conditional_marginal(example1.model, [0, 1], 0, 0, 0)
    with pytest.raises(ProductNotOffered):
        conditional_marginal(example1.model, [0, 1], 0, 2, 0)


def test_expected_profit_example1(example1):
    assert expected_profit_exact(example1, [0, 1, 2]) == pytest.approx(R_ALL, rel=1e-12)
    assert expected_profit_exact(example1, [1, 2]) == pytest.approx(R_23, rel=1e-12)
    assert expected_profit_exact(example1, [0, 2]) == pytest.approx(R_13, rel=1e-12)
    assert expected_profit_exact(example1, []) == 0.0


def test_expected_profit_single_product():
    inst = Instance.from_arrays([[0.4]], [3.0])
    assert expected_profit_exact(inst, [0]) == pytest.approx(3.0 / (1 + math.exp(-0.4)))


def test_profit_linearity_and_oracle():
    rng = np.random.default_rng(13)
    for _ in range(10):
        n = int(rng.integers(1, 8))
        m = random_binary_model(rng, n)
        r = rng.uniform(0, 5, n)
        inst = Instance(m, r)
        s = [int(i) for i in rng.permutation(n)[: rng.integers(1, n + 1)]]
        val = expected_profit_exact(inst, s)
        lin = float(r[s] @ marginal_probabilities(m, s))
        assert val == pytest.approx(lin, abs=1e-10)
        assert val == pytest.approx(oracle_profit(m.theta, r, s), abs=1e-10)


def test_separability():
    rng = np.random.default_rng(17)
    a = random_binary_model(rng, 3).theta
    b = random_binary_model(rng, 3).theta
    t = np.zeros((6, 6))
    t[:3, :3], t[3:, 3:] = a, b
    inst = Instance.from_arrays(t, rng.uniform(0.1, 2, 6))
    for s in ([0, 1, 3], [0, 1, 2, 3, 4, 5], [2, 5]):
        h = [i for i in s if i < 3]
        k = [i for i in s if i >= 3]
        total = expected_profit_exact(inst, s)
        assert total == pytest.approx(expected_profit_exact(inst, h) + expected_profit_exact(inst, k), abs=1e-10)
    assert marginal_probability(inst.model, [0, 1], 0) == pytest.approx(
        marginal_probability(inst.model, [0, 1, 3, 4, 5], 0), abs=1e-12
    )


def test_log_partition_monotone_when_adding_attractive_product():
    rng = np.random.default_rng(19)
    for _ in range(20):
        t = random_binary_model(rng, 6).theta.copy()
        t[5, :] = t[:, 5] = np.abs(t[5, :])
        m = IsingModel(t)
        s = [int(i) for i in rng.permutation(5)[: rng.integers(0, 6)]]
        assert log_partition(m, s + [5]) >= log_partition(m, s)


def test_spin_to_binary_examples():
    assert np.array_equal(spin_to_binary(IsingModel(np.zeros((3, 3)), Domain.SPIN)).theta, np.zeros((3, 3)))
    b = spin_to_binary(IsingModel([[1.0, 0.5], [0.5, 1.0]], Domain.SPIN))
    assert b.domain is Domain.BINARY
    assert np.allclose(b.theta, [[0.0, 2.0], [2.0, 0.0]])
    s = binary_to_spin(b)
    assert np.allclose(s.theta, [[1.0, 0.5], [0.5, 1.0]])
    with pytest.raises(WrongDomain):
        spin_to_binary(b)
    with pytest.raises(WrongDomain):
        binary_to_spin(s)


def test_transform_preserves_every_basket_probability():
    rng = np.random.default_rng(23)
    spin = random_spin_model(rng, 6)
    binary = spin_to_binary(spin)
    ref = oracle_distribution(spin.theta, list(range(6)), Domain.SPIN)
    xs, p = basket_distribution(binary, range(6))
    for row, prob in zip(xs, p):
        assert prob == pytest.approx(ref[tuple(2 * row - 1)], abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 7))
def test_round_trip(seed, n):
    m = random_binary_model(np.random.default_rng(seed), n, off=5.0, diag=5.0)
    back = spin_to_binary(binary_to_spin(m))
    assert np.max(np.abs(back.theta - m.theta)) <= 1e-12


def test_oracle_weights_are_consistent_with_energy():
    from ising_assortment.core import energy

    t = np.array(EXAMPLE1_THETA)
    m = IsingModel(t)
    for x, w in oracle_weights(t, [0, 1, 2]):
        assert energy(m, [0, 1, 2], x) == pytest.approx(math.log(w), abs=1e-12)
