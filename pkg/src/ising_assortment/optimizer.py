"""Assortment optimization: brute force, simulated annealing and weight-ordered
heuristics.

Every search takes an evaluator, a callable mapping an assortment to its
(exact or estimated) expected profit. ``ExactEvaluator`` enumerates baskets;
``SampledEvaluator`` runs the Gibbs sampler with a fresh derived seed per call.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .core import Instance, expected_profit_exact
from .graph import build_graph, default_katz_alpha, katz_centrality, preprocess
from .sampling import SamplerConfig, derive_seed, estimate_profit, make_rng, with_seed
from .errors import TooLarge

BRUTE_FORCE_LIMIT = 20
FINAL_SAMPLE_FACTOR = 4


class ExactEvaluator:
    """Exact ``R(S)`` with a memo table; ``calls`` counts every request."""

    exact = True

    def __init__(self, instance: Instance, limit: int | None = None):
        self.instance = instance
        self.limit = limit
        self.calls = 0
        self._cache: dict[frozenset, float] = {}

    def __call__(self, s: Iterable[int]) -> float:
        self.calls += 1
        key = frozenset(int(i) for i in s)
        if key not in self._cache:
            self._cache[key] = (
                expected_profit_exact(self.instance, sorted(key), self.limit) if key else 0.0
            )
        return self._cache[key]

    def final(self, s: Iterable[int]) -> float:
        key = frozenset(int(i) for i in s)
        if key in self._cache:
            return self._cache[key]
        return expected_profit_exact(self.instance, sorted(key), self.limit) if key else 0.0


class SampledEvaluator:
    """Gibbs estimate of ``R(S)``; call ``c`` uses seed ``derive_seed(seed, c)``.

    ``final`` re-estimates with ``FINAL_SAMPLE_FACTOR`` times the samples and an
    independent seed, which is what results report as their value.
    """

    exact = False

    def __init__(self, instance: Instance, config: SamplerConfig):
        self.instance = instance
        self.config = config
        self.calls = 0

    def __call__(self, s: Iterable[int]) -> float:
        s = sorted(int(i) for i in s)
        cfg = with_seed(self.config, derive_seed(self.config.seed, self.calls))
        self.calls += 1
        if not s:
            return 0.0
        return estimate_profit(self.instance, s, cfg)[0]

    def final(self, s: Iterable[int]) -> float:
        s = sorted(int(i) for i in s)
        if not s:
            return 0.0
        cfg = SamplerConfig(
            n_samples=self.config.n_samples * FINAL_SAMPLE_FACTOR,
            burn_in=self.config.burn_in,
            thinning=self.config.thinning,
            seed=derive_seed(self.config.seed, 2**32),
            scan=self.config.scan,
            chains=self.config.chains,
        )
        return estimate_profit(self.instance, s, cfg)[0]


def make_evaluator(instance: Instance, sampler: SamplerConfig | None = None):
    return ExactEvaluator(instance) if sampler is None else SampledEvaluator(instance, sampler)


@dataclass
class OptimizationResult:
    assortment: tuple[int, ...]
    value: float
    evaluations: int
    trace: list[tuple[int, float, float]] | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.assortment)

    def to_dict(self) -> dict:
        return {
            "assortment": list(self.assortment),
            "value": self.value,
            "evaluations": self.evaluations,
            "metadata": self.metadata,
        }

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "value", "temperature"])
            for it, val, temp in self.trace or []:
                w.writerow([it, repr(float(val)), repr(float(temp))])


def _mask_members(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if (mask >> i) & 1)


def brute_force(instance: Instance, max_n: int = BRUTE_FORCE_LIMIT) -> OptimizationResult:
    """Exhaustive search over all ``2**n`` assortments with exact profits.

    Near-ties (within 1e-12 relative) go to the smaller assortment, then to the
    lexicographically smaller index tuple.
    """
    n = instance.n
    if n > max_n:
        raise TooLarge(f"brute force over n = {n} products exceeds the limit of {max_n}")
    values = _kernels.profit_all_subsets(
        np.ascontiguousarray(instance.theta), np.ascontiguousarray(instance.profits)
    )
    best = float(values.max())
    tol = 1e-12 * max(1.0, abs(best))
    ties = np.flatnonzero(values >= best - tol)
    members = min(
        (_mask_members(int(m), n) for m in ties), key=lambda t: (len(t), t)
    )
    mask = sum(1 << i for i in members)
    return OptimizationResult(
        members, float(values[mask]), 1 << n, metadata={"method": "brute"}
    )


@dataclass(frozen=True)
class AnnealConfig:
    k_temps: int = 10_000
    p_min: float = 0.001
    p_max: float = 0.999
    d_obj: float = 0.25
    start: tuple[int, ...] | None = None  # None: every product
    seed: int = 0
    sampler: SamplerConfig | None = None  # None: exact evaluation
    trace: bool = False

    def __post_init__(self):
        if self.k_temps < 1:
            raise ValueError("k_temps must be >= 1")
        if not 0.0 < self.p_min < self.p_max < 1.0:
            raise ValueError("need 0 < p_min < p_max < 1")
        if self.d_obj <= 0:
            raise ValueError("d_obj must be positive")

    def temperature(self, i: int) -> float:
        """Temperature in force after ``i`` completed iterations."""
        p = self.p_max + (self.p_min - self.p_max) * i / self.k_temps
        return -self.d_obj / math.log(p)

    def to_dict(self) -> dict:
        return {
            "k_temps": self.k_temps,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "d_obj": self.d_obj,
            "start": None if self.start is None else list(self.start),
            "seed": self.seed,
            "sampler": None if self.sampler is None else self.sampler.to_dict(),
        }


def simulated_annealing(
    instance: Instance,
    config: AnnealConfig = AnnealConfig(),
    evaluator: Callable | None = None,
    candidates: Sequence[int] | None = None,
) -> OptimizationResult:
    """Single-flip simulated annealing with one iteration per temperature.

    The acceptance probability target falls linearly from ``p_max`` to
    ``p_min``; the best assortment seen is returned. Flipped products are
    drawn from ``candidates`` (all products by default).
    """
    evaluate = evaluator or make_evaluator(instance, config.sampler)
    pool = np.arange(instance.n) if candidates is None else np.asarray(candidates)
    rng = make_rng(config.seed)
    start = range(instance.n) if config.start is None else config.start
    cur = set(int(i) for i in start)
    r_cur = evaluate(cur)
    heur, r_heur = set(cur), r_cur
    temp = -config.d_obj / math.log(config.p_max)
    trace = [] if config.trace else None
    for i in range(1, config.k_temps + 1):
        j = int(pool[rng.integers(pool.size)])
        can = cur ^ {j}
        r_can = evaluate(can)
        if r_can > r_cur:
            cur, r_cur = can, r_can
        elif rng.random() < math.exp((r_can - r_cur) / temp):
            cur, r_cur = can, r_can
        if r_cur > r_heur:
            heur, r_heur = set(cur), r_cur
        if trace is not None:
            trace.append((i, r_cur, temp))
        temp = config.temperature(i)
    evaluations = evaluate.calls if hasattr(evaluate, "calls") else config.k_temps + 1
    value = evaluate.final(heur) if hasattr(evaluate, "final") else r_heur
    return OptimizationResult(
        tuple(sorted(heur)),
        float(value),
        evaluations,
        trace,
        {"method": "sa", "search_value": float(r_heur), "config": config.to_dict()},
    )


def revenue_weights(instance: Instance) -> np.ndarray:
    return np.array(instance.profits, dtype=np.float64)


def parameter_weights(instance: Instance) -> np.ndarray:
    t = instance.theta
    diag = np.diag(t)
    return instance.profits * np.exp(diag + (t.sum(axis=1) - diag))


def katz_weights(instance: Instance, alpha: float | None = None, beta: float = 1.0) -> np.ndarray:
    graph = build_graph(instance.model)
    if alpha is None:
        alpha = default_katz_alpha(graph)
    return instance.profits * katz_centrality(graph, alpha, beta)


def weight_ordered(
    instance: Instance, weights, evaluator: Callable | None = None
) -> OptimizationResult:
    """Best of the empty set and every prefix of the products sorted by weight.

    Weight ties are broken by ascending product index; value ties favour the
    earlier (smaller) candidate.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (instance.n,):
        raise ValueError(f"weights must have length {instance.n}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    evaluate = evaluator or ExactEvaluator(instance)
    order = sorted(range(instance.n), key=lambda j: (-w[j], j))
    before = getattr(evaluate, "calls", 0)
    best_k, best_val = 0, evaluate(())
    for k in range(1, instance.n + 1):
        val = evaluate(order[:k])
        if val > best_val:
            best_k, best_val = k, val
    evaluations = getattr(evaluate, "calls", before + instance.n + 1) - before
    chosen = tuple(sorted(order[:best_k]))
    value = evaluate.final(chosen) if hasattr(evaluate, "final") else best_val
    return OptimizationResult(
        chosen,
        float(value),
        evaluations,
        metadata={
            "method": "weight_ordered",
            "order": order,
            "search_value": float(best_val),
            "empty_won": best_k == 0,
        },
    )


def solve_decomposed(
    instance: Instance,
    solve: Callable[[Instance], OptimizationResult],
    epsilon: float = 0.0,
    evaluator: Callable | None = None,
) -> OptimizationResult:
    """Preprocess, solve every subproblem with ``solve`` and merge the answers.

    The merged assortment is re-valued with ``evaluator`` (exact by default).
    """
    dec = preprocess(instance, epsilon)
    parts = [solve(sp.instance) for sp in dec.subproblems]
    merged = dec.merge([p.assortment for p in parts])
    evaluate = evaluator or ExactEvaluator(instance)
    value = evaluate.final(merged) if hasattr(evaluate, "final") else evaluate(merged)
    return OptimizationResult(
        tuple(merged),
        float(value),
        sum(p.evaluations for p in parts),
        metadata={
            "method": "decomposed",
            "forced_in": list(dec.forced_in),
            "subproblems": [list(sp.indices) for sp in dec.subproblems],
            "parts": [p.to_dict() for p in parts],
        },
    )
