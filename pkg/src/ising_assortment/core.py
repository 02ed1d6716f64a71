"""Exact Ising choice-model mathematics.

A basket ``x`` drawn from assortment ``S`` has probability proportional to
``exp(sum_i theta_ii x_i + sum_{i != j} x_i theta_ij x_j)``. The pair sum runs
over ordered pairs, so every symmetric coupling enters twice. Products are
indexed from 0.

Exact quantities enumerate all ``2**|S|`` baskets and are therefore capped at
``EXACT_LIMIT`` products; pass ``limit=`` to override per call.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    AssortmentTooLarge,
    DimensionMismatch,
    ProductNotOffered,
    WrongDomain,
)

EXACT_LIMIT = 25
SYMMETRY_TOL = 1e-9


class Domain(str, enum.Enum):
    BINARY = "binary"
    SPIN = "spin"

    @property
    def values(self) -> tuple[float, float]:
        """(absent, present) coding of a product in a basket."""
        return (0.0, 1.0) if self is Domain.BINARY else (-1.0, 1.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Symmetric parameter matrix over ``n`` products plus its variable domain.

    Asymmetric input is replaced by ``(theta + theta.T) / 2``; a warning is
    emitted when the asymmetry exceeds ``SYMMETRY_TOL``.
    """

    theta: np.ndarray
    domain: Domain = Domain.BINARY

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
            raise DimensionMismatch(f"theta must be square, got shape {theta.shape}")
        if theta.shape[0] < 1:
            raise DimensionMismatch("model needs at least one product")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta has non-finite entries")
        asym = float(np.max(np.abs(theta - theta.T)))
        if asym > 0.0:
            if asym > SYMMETRY_TOL:
                warnings.warn(
                    f"theta asymmetric by {asym:.3g}; symmetrizing", stacklevel=3
                )
            theta = (theta + theta.T) / 2.0
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "domain", Domain(self.domain))

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def restrict(self, indices: Sequence[int]) -> "IsingModel":
        idx = np.asarray(indices, dtype=np.int64)
        return IsingModel(self.theta[np.ix_(idx, idx)], self.domain)

    def __eq__(self, other):
        if not isinstance(other, IsingModel):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.theta, other.theta)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Instance:
    """A binary-domain model paired with per-product profit margins."""

    model: IsingModel
    profits: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.model.domain is not Domain.BINARY:
            raise WrongDomain("an Instance requires a binary-domain model")
        r = np.asarray(self.profits, dtype=np.float64)
        if r.shape != (self.model.n,):
            raise DimensionMismatch(
                f"profits must have length {self.model.n}, got shape {r.shape}"
            )
        if not np.all(np.isfinite(r)):
            raise ValueError("profits must be finite")
        object.__setattr__(self, "profits", _frozen(r))

    @classmethod
    def from_arrays(cls, theta, profits) -> "Instance":
        return cls(IsingModel(theta, Domain.BINARY), profits)

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def theta(self) -> np.ndarray:
        return self.model.theta

    def restrict(self, indices: Sequence[int]) -> "Instance":
        idx = np.asarray(indices, dtype=np.int64)
        return Instance(self.model.restrict(idx), self.profits[idx])

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.model == other.model and np.array_equal(self.profits, other.profits)

    __hash__ = None


def as_assortment(n: int, s: Iterable[int]) -> np.ndarray:
    """Validate an assortment against ``n`` products, keeping its order."""
    idx = np.array([int(i) for i in s], dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DimensionMismatch(f"assortment indices must lie in [0, {n})")
    if np.unique(idx).size != idx.size:
        raise DimensionMismatch("assortment contains duplicate products")
    return idx


def _check_size(size: int, limit: int | None) -> None:
    limit = EXACT_LIMIT if limit is None else limit
    if size > limit:
        raise AssortmentTooLarge(
            f"|S| = {size} exceeds the exact-enumeration limit of {limit}; use sampling"
        )


def _enumerate(model: IsingModel, idx: np.ndarray, r=None, marginals=False, pair=(-1, -1)):
    sub = np.ascontiguousarray(model.theta[np.ix_(idx, idx)])
    rs = np.zeros(idx.size) if r is None else np.ascontiguousarray(r, dtype=np.float64)
    lo, hi = model.domain.values
    return _kernels.enumerate_baskets(sub, lo, hi, rs, marginals, pair[0], pair[1])


def energy(model: IsingModel, s: Iterable[int], x) -> float:
    """Unnormalized log-weight of basket ``x`` over assortment ``s``."""
    idx = as_assortment(model.n, s)
    x = _check_basket(model, idx, x)
    sub = model.theta[np.ix_(idx, idx)]
    diag = np.diag(sub)
    return float(diag @ x + x @ sub @ x - diag @ (x * x))


def _check_basket(model: IsingModel, idx: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != idx.size:
        raise DimensionMismatch(f"basket length {x.size} != assortment size {idx.size}")
    allowed = model.domain.values
    if not np.all((x == allowed[0]) | (x == allowed[1])):
        raise DimensionMismatch(f"basket entries must be in {allowed}")
    return x


def log_partition(model: IsingModel, s: Iterable[int], limit: int | None = None) -> float:
    idx = as_assortment(model.n, s)
    _check_size(idx.size, limit)
    return float(_enumerate(model, idx)[0])


def basket_probability(
    model: IsingModel, s: Iterable[int], x, limit: int | None = None
) -> float:
    idx = as_assortment(model.n, s)
    x = _check_basket(model, idx, x)
    _check_size(idx.size, limit)
    return float(np.exp(energy(model, idx, x) - log_partition(model, idx, limit)))


def basket_distribution(model: IsingModel, s: Iterable[int], limit: int | None = None):
    """All baskets of ``s`` (rows, in binary counting order) and their probabilities.

    Vectorized; intended for small assortments.
    """
    idx = as_assortment(model.n, s)
    _check_size(idx.size, limit)
    k = idx.size
    codes = np.arange(1 << k)
    bits = ((codes[:, None] >> np.arange(k)[None, :]) & 1).astype(np.float64)
    lo, hi = model.domain.values
    xs = lo + (hi - lo) * bits
    sub = model.theta[np.ix_(idx, idx)]
    diag = np.diag(sub)
    e = xs @ diag + np.einsum("bi,ij,bj->b", xs, sub, xs) - (xs * xs) @ diag
    logp = e - np.logaddexp.reduce(e) if k else e
    return xs, np.exp(logp)


def marginal_probabilities(
    model: IsingModel, s: Iterable[int], limit: int | None = None
) -> np.ndarray:
    """``P(product is in the basket | S)`` for every member of ``s``, in order."""
    idx = as_assortment(model.n, s)
    _check_size(idx.size, limit)
    return _enumerate(model, idx, marginals=True)[2]


def marginal_probability(
    model: IsingModel, s: Iterable[int], k: int, limit: int | None = None
) -> float:
    idx = as_assortment(model.n, s)
    pos = _position(idx, k)
    return float(marginal_probabilities(model, idx, limit)[pos])


def _position(idx: np.ndarray, k: int) -> int:
    hits = np.flatnonzero(idx == k)
    if hits.size == 0:
        raise ProductNotOffered(f"product {k} is not in the assortment")
    return int(hits[0])


def conditional_marginal(
    model: IsingModel,
    s: Iterable[int],
    l: int,
    k: int,
    k_value: int,
    limit: int | None = None,
) -> float:
    """``P(x_l = 1 | x_k = k_value, S)`` computed from the joint of ``(x_l, x_k)``."""
    idx = as_assortment(model.n, s)
    if l == k:
        raise DimensionMismatch("l and k must differ")
    if k_value not in (0, 1):
        raise DimensionMismatch("k_value must be 0 or 1")
    pl, pk = _position(idx, l), _position(idx, k)
    _check_size(idx.size, limit)
    cells = _enumerate(model, idx, pair=(pk, pl))[3]
    # cells[2*[x_k on] + [x_l on]]
    joint = cells[2 * k_value + 1]
    return float(joint / (cells[2 * k_value] + joint))


def expected_profit_exact(
    instance: Instance, s: Iterable[int], limit: int | None = None
) -> float:
    """Expected profit ``R(S)`` of one random customer, by enumeration."""
    idx = as_assortment(instance.n, s)
    if idx.size == 0:
        return 0.0
    _check_size(idx.size, limit)
    return float(_enumerate(instance.model, idx, r=instance.profits[idx])[1])


def spin_to_binary(spin_model: IsingModel) -> IsingModel:
    """Binary-domain parameters giving the same basket probabilities."""
    if spin_model.domain is not Domain.SPIN:
        raise WrongDomain("spin_to_binary expects a spin-domain model")
    t = spin_model.theta
    diag = np.diag(t)
    off_rows = t.sum(axis=1) - diag
    out = 4.0 * t
    np.fill_diagonal(out, 2.0 * diag - 4.0 * off_rows)
    return IsingModel(out, Domain.BINARY)


def binary_to_spin(binary_model: IsingModel) -> IsingModel:
    if binary_model.domain is not Domain.BINARY:
        raise WrongDomain("binary_to_spin expects a binary-domain model")
    t = binary_model.theta
    diag = np.diag(t)
    off_rows = t.sum(axis=1) - diag
    out = t / 4.0
    np.fill_diagonal(out, (diag + off_rows) / 2.0)
    return IsingModel(out, Domain.SPIN)
