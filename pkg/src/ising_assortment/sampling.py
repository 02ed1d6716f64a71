"""Gibbs sampling of baskets and Monte Carlo profit estimates.

Random numbers come from numpy's counter-based Philox generator keyed by
``SeedSequence([seed, chain])``, so a given configuration produces the same
baskets on every platform. Chains start from the empty basket.

One retained sample is the state after ``thinning`` full systematic sweeps, or
after ``thinning * |S|`` random-scan single-site updates.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _kernels
from .core import Domain, Instance, IsingModel, as_assortment
from .errors import DimensionMismatch, EmptyAssortment, WrongDomain

# Upper bound on uniforms drawn per kernel call (memory cap).
_CHUNK = 1 << 20


class Scan(str, enum.Enum):
    SYSTEMATIC = "systematic"
    RANDOM = "random"


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int = 10_000
    burn_in: int = 100
    thinning: int = 1
    seed: int = 0
    scan: Scan = Scan.SYSTEMATIC
    chains: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "scan", Scan(self.scan))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scan"] = self.scan.value
        return d


@dataclass(frozen=True, eq=False)
class SampleBatch:
    baskets: np.ndarray  # (n_samples, |S|) uint8
    assortment: tuple[int, ...]
    config: SamplerConfig = field(default_factory=SamplerConfig)

    def profits(self, r) -> np.ndarray:
        """Per-basket profit ``sum_j r_j x_j`` given full-length margins ``r``."""
        r = np.asarray(r, dtype=np.float64)[list(self.assortment)]
        return self.baskets @ r


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit child seed of ``seed`` for the given integer keys."""
    words = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2)
    return int(words[0]) | (int(words[1]) << 32)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)]))
    )


def _prepare(model: IsingModel, s: Iterable[int]):
    if model.domain is not Domain.BINARY:
        raise WrongDomain("Gibbs samplers run on binary-domain models")
    idx = as_assortment(model.n, s)
    return idx, np.ascontiguousarray(model.theta[np.ix_(idx, idx)])


def _state(x, size) -> np.ndarray:
    x = np.array(x, dtype=np.int64).reshape(-1)
    if x.size != size:
        raise DimensionMismatch(f"basket length {x.size} != assortment size {size}")
    if not np.all((x == 0) | (x == 1)):
        raise DimensionMismatch("basket entries must be 0 or 1")
    return x


def gibbs_sweep_systematic(model: IsingModel, s, x, rng: np.random.Generator) -> np.ndarray:
    """One full pass resampling every coordinate, in assortment order."""
    idx, sub = _prepare(model, s)
    state = _state(x, idx.size)
    u = rng.random((1, idx.size))
    _kernels.systematic_run(sub, state, u, np.empty((0, idx.size), np.uint8), 1, False)
    return state.astype(np.uint8)


def gibbs_step_random(model: IsingModel, s, x, rng: np.random.Generator) -> np.ndarray:
    """Resample one uniformly chosen coordinate."""
    idx, sub = _prepare(model, s)
    state = _state(x, idx.size)
    k = rng.integers(0, idx.size, size=1)
    u = rng.random(1)
    _kernels.random_run(sub, state, k, u, np.empty((0, idx.size), np.uint8), 1, False)
    return state.astype(np.uint8)


def conditional_on_probability(model: IsingModel, s, x, k: int) -> float:
    """``P(x_k = 1 | x_-k)`` for position ``k`` of the assortment, closed form."""
    idx, sub = _prepare(model, s)
    state = _state(x, idx.size).astype(np.float64)
    h = sub[k, k] + 2.0 * (sub[k] @ state - sub[k, k] * state[k])
    return float(1.0 / (1.0 + np.exp(-h)))


def _run_chain(sub: np.ndarray, n: int, cfg: SamplerConfig, chain: int) -> np.ndarray:
    s = sub.shape[0]
    rng = make_rng(cfg.seed, chain)
    x = np.zeros(s, dtype=np.int64)
    out = np.empty((n, s), dtype=np.uint8)
    if cfg.scan is Scan.SYSTEMATIC:
        left = cfg.burn_in
        while left:
            k = min(left, max(1, _CHUNK // s))
            _kernels.systematic_run(sub, x, rng.random((k, s)), out, 1, False)
            left -= k
        per = max(1, _CHUNK // (s * cfg.thinning))
        row = 0
        while row < n:
            k = min(per, n - row)
            u = rng.random((k * cfg.thinning, s))
            _kernels.systematic_run(sub, x, u, out[row : row + k], cfg.thinning, True)
            row += k
    else:
        left = cfg.burn_in * s
        while left:
            k = min(left, _CHUNK)
            _kernels.random_run(sub, x, rng.integers(0, s, size=k), rng.random(k), out, 1, False)
            left -= k
        steps = s * cfg.thinning
        per = max(1, _CHUNK // steps)
        row = 0
        while row < n:
            k = min(per, n - row)
            idx = rng.integers(0, s, size=k * steps)
            u = rng.random(k * steps)
            _kernels.random_run(sub, x, idx, u, out[row : row + k], steps, True)
            row += k
    return out


def sample_baskets(
    model: IsingModel, s: Iterable[int], config: SamplerConfig, threads: int = 1
) -> SampleBatch:
    """Draw ``config.n_samples`` baskets from the choice distribution over ``s``.

    Samples are split evenly across ``config.chains`` independent chains (each
    with its own burn-in) and concatenated in chain order; ``threads`` only
    affects wall time, never the output.
    """
    idx, sub = _prepare(model, s)
    if idx.size == 0:
        raise EmptyAssortment("cannot sample baskets from an empty assortment")
    c = config.chains
    sizes = [config.n_samples // c + (1 if i < config.n_samples % c else 0) for i in range(c)]
    jobs = [(i, m) for i, m in enumerate(sizes) if m]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda j: _run_chain(sub, j[1], config, j[0]), jobs))
    else:
        parts = [_run_chain(sub, m, config, i) for i, m in jobs]
    return SampleBatch(np.concatenate(parts, axis=0), tuple(int(i) for i in idx), config)


def estimate_profit(
    instance: Instance, s: Iterable[int], config: SamplerConfig, threads: int = 1
) -> tuple[float, float]:
    """Monte Carlo ``R(S)``: mean basket profit and its standard error."""
    idx = as_assortment(instance.n, s)
    if idx.size == 0:
        return 0.0, 0.0
    batch = sample_baskets(instance.model, idx, config, threads)
    vals = batch.profits(instance.profits)
    if vals.size < 2:
        return float(vals.mean()), float("nan")
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size))


def with_seed(config: SamplerConfig, seed: int) -> SamplerConfig:
    return replace(config, seed=int(seed))


def write_batch(batch: SampleBatch, path) -> Path:
    """Write the CSV (header = product indices) and a ``.json`` sidecar."""
    path = Path(path)
    header = ",".join(str(i) for i in batch.assortment)
    rows = "\n".join(",".join("1" if v else "0" for v in row) for row in batch.baskets)
    path.write_text(header + "\n" + rows + ("\n" if rows else ""))
    sidecar = path.with_suffix(".json")
    sidecar.write_text(
        json.dumps(
            {"assortment": list(batch.assortment), "config": batch.config.to_dict()},
            indent=1,
        )
        + "\n"
    )
    return sidecar


def read_batch_csv(path) -> tuple[list[int], np.ndarray]:
    """Read a basket CSV back as (product indices, 0/1 matrix)."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = [int(v) for v in lines[0].split(",")]
    data = np.zeros((len(lines) - 1, len(header)), dtype=np.uint8)
    for r, line in enumerate(lines[1:]):
        vals = line.split(",")
        if len(vals) != len(header) or any(v not in ("0", "1") for v in vals):
            raise ValueError(f"{path}:{r + 2}: expected {len(header)} comma-separated 0/1 values")
        data[r] = [int(v) for v in vals]
    return header, data
