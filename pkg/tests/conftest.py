"""Shared fixtures and brute-force oracles written without the package kernels."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from ising_assortment import Domain, Instance, IsingModel

EXAMPLE1_THETA = [[1.0, 5.0, 2.0], [5.0, 5.0, -5.0], [2.0, -5.0, 5.0]]
EXAMPLE1_PROFITS = [10.0, 10.0, 100.0]


@pytest.fixture
def example1() -> Instance:
    return Instance.from_arrays(EXAMPLE1_THETA, EXAMPLE1_PROFITS)


def oracle_weights(theta, s, domain=Domain.BINARY):
    """Unnormalized weights of every basket over ``s`` (itertools order)."""
    vals = domain.values
    out = []
    for x in itertools.product(vals, repeat=len(s)):
        e = 0.0
        for a, i in enumerate(s):
            e += theta[i][i] * x[a]
            for b, j in enumerate(s):
                if a != b:
                    e += x[a] * theta[i][j] * x[b]
        out.append((x, math.exp(e)))
    return out


def oracle_distribution(theta, s, domain=Domain.BINARY) -> dict:
    w = oracle_weights(theta, s, domain)
    z = sum(v for _, v in w)
    return {x: v / z for x, v in w}


def oracle_profit(theta, r, s) -> float:
    return sum(p * sum(r[i] * xi for i, xi in zip(s, x)) for x, p in oracle_distribution(theta, s).items())


def random_binary_model(rng, n, off=1.0, diag=2.0) -> IsingModel:
    t = np.triu(rng.uniform(-off, off, (n, n)), 1)
    t = t + t.T
    np.fill_diagonal(t, rng.uniform(-diag, diag, n))
    return IsingModel(t, Domain.BINARY)


def random_spin_model(rng, n, scale=1.0) -> IsingModel:
    t = np.triu(rng.uniform(-scale, scale, (n, n)), 1)
    t = t + t.T
    np.fill_diagonal(t, rng.uniform(-scale, scale, n))
    return IsingModel(t, Domain.SPIN)


def random_instance(rng, n, density=0.6, p_neg=0.5) -> Instance:
    t = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                w = rng.uniform(0.5, 3.0) * (-1 if rng.random() < p_neg else 1)
                t[i, j] = t[j, i] = w
    np.fill_diagonal(t, rng.uniform(-1.0, 3.0, n))
    return Instance.from_arrays(t, rng.uniform(0.01, 1.0, n))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
