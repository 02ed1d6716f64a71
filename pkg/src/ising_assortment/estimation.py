"""Fitting spin-domain Ising parameters from basket data.

Two estimators are provided:

* ``dc_estimate`` - Density Consistency closed forms built from the first and
  second empirical moments (no optimization at all).
* ``sparse_mle_estimate`` - l1-penalized likelihood in which the intractable
  log-partition function is replaced by a log-determinant upper bound, solved
  by proximal gradient descent.

Both return spin-domain models; use ``core.spin_to_binary`` to obtain the
binary-domain choice model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Domain, IsingModel, log_partition
from .errors import (
    DegenerateColumn,
    DimensionMismatch,
    InnerSolveFailed,
    MomentOutOfRange,
    SingularSigma,
    WrongDomain,
)

ARCTANH_CLIP = 1.0 - 1e-9
SERIES_CUTOFF = 1e-6
DEFAULT_RHO = 0.015


@dataclass(frozen=True, eq=False)
class TransactionSample:
    """``m`` baskets over ``n`` products in spin coding (+1 bought, -1 not)."""

    baskets: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.baskets)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1:
            raise DimensionMismatch("baskets must be a non-empty m x n matrix")
        if not np.all((b == 1) | (b == -1)):
            raise ValueError("spin baskets must contain only -1 and +1")
        b = b.astype(np.int8)
        b.setflags(write=False)
        object.__setattr__(self, "baskets", b)

    @classmethod
    def from_binary(cls, baskets) -> "TransactionSample":
        b = np.asarray(baskets)
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("binary baskets must contain only 0 and 1")
        return cls(2 * b.astype(np.int8) - 1)

    @property
    def m(self) -> int:
        return self.baskets.shape[0]

    @property
    def n(self) -> int:
        return self.baskets.shape[1]


@dataclass(frozen=True, eq=False)
class Moments:
    mu: np.ndarray
    s: np.ndarray
    c: np.ndarray
    m: int = 0

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    def permuted(self, perm) -> "Moments":
        p = np.asarray(perm)
        return Moments(self.mu[p], self.s[np.ix_(p, p)], self.c[np.ix_(p, p)], self.m)


def compute_moments(data: TransactionSample) -> Moments:
    b = data.baskets.astype(np.float64)
    mu = b.mean(axis=0)
    s = (b.T @ b) / data.m
    s = (s + s.T) / 2.0
    np.fill_diagonal(s, 1.0)
    bad = np.flatnonzero(np.abs(mu) >= 1.0)
    if bad.size:
        raise DegenerateColumn(
            f"products {bad.tolist()} are bought in every basket or in none"
        )
    return Moments(mu, s, s - np.outer(mu, mu), data.m)


def moments_from_model(model: IsingModel) -> Moments:
    """Exact spin moments of a spin-domain model, by full enumeration."""
    from .core import basket_distribution

    if model.domain is not Domain.SPIN:
        raise WrongDomain("moments_from_model expects a spin-domain model")
    xs, p = basket_distribution(model, range(model.n))
    mu = p @ xs
    s = xs.T @ (xs * p[:, None])
    np.fill_diagonal(s, 1.0)
    return Moments(mu, s, s - np.outer(mu, mu), 0)


def _linear_term(theta: np.ndarray, moments: Moments) -> float:
    diag = np.diag(theta)
    off = theta.copy()
    np.fill_diagonal(off, 0.0)
    return float(diag @ moments.mu + np.sum(off * moments.s))


def neg_mean_log_likelihood(
    theta_tilde: IsingModel, moments: Moments, limit: int | None = None
) -> float:
    """Average negative log-likelihood of the data under a spin model (exact)."""
    if theta_tilde.domain is not Domain.SPIN:
        raise WrongDomain("expected a spin-domain model")
    if theta_tilde.n != moments.n:
        raise DimensionMismatch("model and moments disagree on n")
    a = log_partition(theta_tilde, range(theta_tilde.n), limit)
    return a - _linear_term(theta_tilde.theta, moments)


# --- Density Consistency -----------------------------------------------------


def _sigma_diag(mu: np.ndarray) -> np.ndarray:
    out = np.empty_like(mu)
    small = np.abs(mu) < SERIES_CUTOFF
    m2 = mu[small] ** 2
    out[small] = 1.0 - m2 / 3.0 - 4.0 * m2 * m2 / 45.0
    big = ~small
    out[big] = mu[big] / np.arctanh(mu[big])
    return out


def dc_estimate(moments: Moments) -> IsingModel:
    """Density Consistency estimate of the spin-domain parameters."""
    mu = np.array(moments.mu, dtype=np.float64)
    c = np.array(moments.c, dtype=np.float64)
    n = mu.size
    if np.any(np.abs(mu) >= 1.0):
        bad = np.flatnonzero(np.abs(mu) >= 1.0).tolist()
        raise MomentOutOfRange(f"|mu| >= 1 for products {bad}")
    if np.any(np.abs(mu) > ARCTANH_CLIP):
        warnings.warn("clipping |mu| to 1 - 1e-9 before arctanh", stacklevel=2)
        mu = np.clip(mu, -ARCTANH_CLIP, ARCTANH_CLIP)

    mi, mj = mu[:, None], mu[None, :]
    # Four (scaled) pair probabilities: ++, +-, -+, --.
    ppp = (1 + mi) * (1 + mj) + c
    ppm = (1 + mi) * (1 - mj) - c
    pmp = (1 - mi) * (1 + mj) - c
    pmm = (1 - mi) * (1 - mj) + c
    off = ~np.eye(n, dtype=bool)
    for name, arr in (("++", ppp), ("+-", ppm), ("-+", pmp), ("--", pmm)):
        bad = np.argwhere((arr <= 0) & off)
        if bad.size:
            i, j = bad[0]
            raise MomentOutOfRange(
                f"pair ({i}, {j}): log argument for {name} is {arr[i, j]:.3g} <= 0"
            )
    with np.errstate(divide="ignore", invalid="ignore"):
        ip_field_terms = np.where(off, np.log((ppp * ppm) / (pmp * pmm)), 0.0)
        ip_coupling = np.where(off, 0.25 * np.log((ppp * pmm) / (ppm * pmp)), 0.0)
    atanh_mu = np.arctanh(mu)
    ip_field = -(n - 2) * atanh_mu + 0.25 * ip_field_terms.sum(axis=1)

    sd = _sigma_diag(mu)
    cd = np.diag(c)
    sigma = c * np.sqrt(np.outer(sd, sd) / np.outer(cd, cd))
    np.fill_diagonal(sigma, sd)
    det2 = np.outer(sd, sd) - sigma**2
    if np.any(det2[off] <= 0):
        i, j = np.argwhere((det2 <= 0) & off)[0]
        raise SingularSigma(f"pair ({i}, {j}) has a non-positive 2x2 Sigma determinant")
    try:
        sigma_inv = np.linalg.inv(sigma)
    except np.linalg.LinAlgError as exc:
        raise SingularSigma(str(exc)) from exc
    if not np.all(np.isfinite(sigma_inv)) or np.linalg.cond(sigma) > 1e14:
        raise SingularSigma("Sigma is numerically singular")

    with np.errstate(divide="ignore", invalid="ignore"):
        pair_field = np.where(off, (sd[None, :] * mi - sigma * mj) / det2, 0.0)
        pair_coupling = np.where(off, sigma / det2, 0.0)
    theta = 0.5 * (ip_coupling - sigma_inv - pair_coupling)
    field_dc = ip_field + (n - 2) * atanh_mu - pair_field.sum(axis=1) + sigma_inv @ mu
    theta = (theta + theta.T) / 2.0
    np.fill_diagonal(theta, field_dc)
    return IsingModel(theta, Domain.SPIN)


# --- Log-determinant bound and sparse MLE -------------------------------------


def bound_matrix(theta: np.ndarray) -> np.ndarray:
    """The (n+1) x (n+1) matrix Q: fields on the border, doubled couplings inside."""
    n = theta.shape[0]
    q = np.zeros((n + 1, n + 1))
    d = np.diag(theta)
    q[0, 1:] = d
    q[1:, 0] = d
    inner = 2.0 * theta
    np.fill_diagonal(inner, 0.0)
    q[1:, 1:] = inner
    return q


def _q_vector(n: int) -> np.ndarray:
    q = np.full(n + 1, 4.0 / 3.0)
    q[0] = 1.0
    return q


def _chol(a: np.ndarray):
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None


@dataclass
class BoundSolution:
    value: float
    v: np.ndarray
    w: np.ndarray  # inverse of -Q - diag(v) at the optimum
    grad_norm: float
    iterations: int


def solve_bound(
    theta: np.ndarray, v0=None, tol: float = 1e-9, max_iter: int = 200
) -> BoundSolution:
    """Maximize ``q'v + logdet(-Q - diag(v))`` by damped Newton ascent.

    Every iterate keeps ``-Q - diag(v)`` positive definite (backtracking on a
    failed Cholesky).
    """
    n = theta.shape[0]
    big_q = bound_matrix(theta)
    q = _q_vector(n)
    const = 0.5 * n * math.log(math.e * math.pi / 2.0) - 0.5 * (n + 1)

    if v0 is None or _chol(-big_q - np.diag(v0)) is None:
        lam_min = np.linalg.eigvalsh(-big_q)[0]
        v = np.full(n + 1, lam_min - 1.0)
    else:
        v = np.array(v0, dtype=np.float64)
    ch = _chol(-big_q - np.diag(v))
    if ch is None:
        raise InnerSolveFailed("could not find a feasible starting point")

    def objective(chol, vv):
        return float(q @ vv + 2.0 * np.sum(np.log(np.diag(chol))))

    f = objective(ch, v)
    for it in range(1, max_iter + 1):
        eye = np.eye(n + 1)
        w = np.linalg.solve(ch.T, np.linalg.solve(ch, eye))
        g = q - np.diag(w)
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            return BoundSolution(const - 0.5 * f, v, w, gn, it)
        step = np.linalg.solve(w * w, g)
        t = 1.0
        slope = float(g @ step)
        while True:
            cand = v + t * step
            ch_c = _chol(-big_q - np.diag(cand))
            if ch_c is not None:
                f_c = objective(ch_c, cand)
                if f_c >= f + 0.25 * t * slope:
                    break
            t *= 0.5
            if t < 1e-20:
                raise InnerSolveFailed("line search failed in the bound solver")
        v, ch, f = cand, ch_c, f_c
    raise InnerSolveFailed(f"bound solver hit the iteration cap ({max_iter})")


def log_partition_upper_bound(
    theta_tilde: IsingModel, tol: float = 1e-6, max_iter: int = 200
) -> float:
    """Log-determinant upper bound on the spin-model log-partition function."""
    if theta_tilde.domain is not Domain.SPIN:
        raise WrongDomain("expected a spin-domain model")
    return solve_bound(theta_tilde.theta, tol=tol, max_iter=max_iter).value


@dataclass
class SparseMLEResult:
    model: IsingModel
    objective: float
    converged: bool
    iterations: int
    history: list[float] = field(default_factory=list)


def _penalized_objective(theta, moments, rho, v0, inner_tol):
    sol = solve_bound(theta, v0=v0, tol=inner_tol)
    smooth = sol.value - _linear_term(theta, moments)
    iu = np.triu_indices(theta.shape[0], 1)
    return smooth, smooth + 2.0 * rho * np.sum(np.abs(theta[iu])), sol


def _smooth_grad(theta, moments, sol):
    """Gradient in (field, upper-coupling) coordinates, returned as a matrix."""
    w = sol.w
    g = 2.0 * (w[1:, 1:] - moments.s)
    np.fill_diagonal(g, w[0, 1:] - moments.mu)
    return g


def sparse_mle_estimate(
    moments: Moments,
    rho: float = DEFAULT_RHO,
    tol: float = 1e-6,
    max_iter: int = 5000,
    inner_tol: float = 1e-9,
    init: IsingModel | None = None,
) -> SparseMLEResult:
    """l1-penalized approximate MLE over spin parameters.

    Minimizes ``bound(theta) - linear(theta) + rho * sum_{i != j} |theta_ij|`` by
    proximal gradient steps with backtracking, so the recorded objective never
    increases. Coordinates are the fields ``theta_ii`` and the upper-triangle
    couplings; only couplings are soft-thresholded, which produces exact zeros.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    n = moments.n
    iu = np.triu_indices(n, 1)
    theta = np.zeros((n, n)) if init is None else np.array(init.theta, dtype=np.float64)
    smooth, obj, sol = _penalized_objective(theta, moments, rho, None, inner_tol)
    history = [obj]
    grad = _smooth_grad(theta, moments, sol)
    eta = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        while True:
            cand = theta - eta * grad
            ut = cand[iu]
            ut = np.sign(ut) * np.maximum(np.abs(ut) - 2.0 * rho * eta, 0.0)
            new = np.zeros((n, n))
            new[iu] = ut
            new = new + new.T
            np.fill_diagonal(new, np.diag(cand))
            diff = np.concatenate([np.diag(new - theta), (new - theta)[iu]])
            gvec = np.concatenate([np.diag(grad), grad[iu]])
            try:
                s_new, o_new, sol_new = _penalized_objective(
                    new, moments, rho, sol.v, inner_tol
                )
            except InnerSolveFailed:
                eta *= 0.5
                continue
            if s_new <= smooth + gvec @ diff + (diff @ diff) / (2.0 * eta) + 1e-12:
                break
            eta *= 0.5
            if eta < 1e-16:
                break
        step_norm = float(np.max(np.abs(diff))) / eta if diff.size else 0.0
        if o_new <= obj + 1e-12:
            theta, smooth, obj, sol = new, s_new, o_new, sol_new
            grad = _smooth_grad(theta, moments, sol)
            history.append(obj)
        if step_norm <= tol:
            converged = True
            break
        eta = min(eta * 2.0, 1e3)
    if not converged:
        warnings.warn(
            f"sparse MLE did not converge in {max_iter} iterations", stacklevel=2
        )
    return SparseMLEResult(IsingModel(theta, Domain.SPIN), obj, converged, it, history)
