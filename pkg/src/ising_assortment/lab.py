"""Synthetic instances and the benchmark experiments.

Uniform draws use the half-open convention ``[lo, hi)``. Every instance and
every method run gets its own generator derived from the master seed, so a
report does not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import EXACT_LIMIT, Instance, expected_profit_exact
from .optimizer import (
    AnnealConfig,
    ExactEvaluator,
    SampledEvaluator,
    brute_force,
    katz_weights,
    parameter_weights,
    revenue_weights,
    simulated_annealing,
    weight_ordered,
)
from .sampling import SamplerConfig, derive_seed, estimate_profit, make_rng, with_seed

METHODS = ("SA", "RevenueWeights", "ParameterWeights", "KatzWeights")


@dataclass(frozen=True)
class GenConfig:
    n: int = 50
    p_edge: float = 0.2
    p_neg: float = 0.8
    node_range: tuple[float, float] = (2.0, 4.0)
    edge_abs_range: tuple[float, float] = (1.0, 2.0)
    profit_range: tuple[float, float] = (0.01, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for name in ("p_edge", "p_neg"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("node_range", "edge_abs_range", "profit_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lo > hi")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("node_range", "edge_abs_range", "profit_range"):
            d[k] = list(d[k])
        return d


def _uniform(rng, bounds, size) -> np.ndarray:
    lo, hi = bounds
    return lo + (hi - lo) * rng.random(size)


def generate_instance(config: GenConfig) -> Instance:
    """Random instance: node weights, signed random edges and profits.

    A fixed number of draws is made regardless of the probabilities, so
    changing ``p_edge`` does not shift the node or profit streams.
    """
    n = config.n
    rng = make_rng(config.seed)
    nodes = _uniform(rng, config.node_range, n)
    iu, ju = np.triu_indices(n, 1)
    has_edge = rng.random(iu.size) < config.p_edge
    mag = _uniform(rng, config.edge_abs_range, iu.size)
    sign = np.where(rng.random(iu.size) < config.p_neg, -1.0, 1.0)
    profits = _uniform(rng, config.profit_range, n)
    theta = np.diag(nodes)
    w = np.where(has_edge, sign * mag, 0.0)
    theta[iu, ju] = w
    theta[ju, iu] = w
    return Instance.from_arrays(theta, profits)


@dataclass
class BenchmarkReport:
    """Per-instance rows plus per-method means.

    ``metric`` names the per-row score: ``gain`` (relative to offering every
    product) or ``gap`` (relative to the brute-force optimum).
    """

    metric: str
    rows: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def methods(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row["method"], None)
        return list(seen)

    def values(self, method: str, key: str | None = None) -> np.ndarray:
        key = key or self.metric
        return np.array([r[key] for r in self.rows if r["method"] == method], dtype=float)

    def aggregates(self) -> dict:
        out = {}
        for m in self.methods:
            v = self.values(m)
            size = self.values(m, "size")
            out[m] = {
                f"mean_{self.metric}": float(v.mean()),
                f"se_{self.metric}": float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0,
                "mean_size": float(size.mean()),
                "mean_runtime": float(self.values(m, "runtime").mean()),
                "count": int(v.size),
            }
        return out

    def to_csv(self, include_runtime: bool = True) -> str:
        cols = ["instance", "method", self.metric, "size", "value", "reference"]
        if include_runtime:
            cols.append("runtime")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()

    def to_long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "value"])
        for row in self.rows:
            w.writerow([row["method"], self.metric, repr(row[self.metric])])
            w.writerow([row["method"], "size", row["size"]])
        return buf.getvalue()

    def summary(self, include_runtime: bool = True) -> dict:
        agg = self.aggregates()
        if not include_runtime:
            for v in agg.values():
                v.pop("mean_runtime")
        return {"metric": self.metric, "config": self.config, "methods": agg}

    def write(self, directory, stem: str) -> list[Path]:
        """Deterministic files (rows, long CSV, summary) plus a separate timings CSV."""
        d = Path(directory)
        files = {
            f"{stem}.csv": self.to_csv(include_runtime=False),
            f"{stem}_long.csv": self.to_long_csv(),
            f"{stem}_summary.json": json.dumps(self.summary(False), indent=1) + "\n",
            f"{stem}_timings.csv": self._timings_csv(),
        }
        paths = []
        for name, text in files.items():
            p = d / name
            p.write_text(text)
            paths.append(p)
        return paths

    def _timings_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "method", "runtime"])
        for row in self.rows:
            w.writerow([row["instance"], row["method"], repr(row["runtime"])])
        return buf.getvalue()


def _run_method(method: str, inst: Instance, evaluator, anneal: AnnealConfig, seed: int, katz_beta: float):
    if method == "SA":
        return simulated_annealing(inst, replace(anneal, seed=seed), evaluator)
    if method == "RevenueWeights":
        return weight_ordered(inst, revenue_weights(inst), evaluator)
    if method == "ParameterWeights":
        return weight_ordered(inst, parameter_weights(inst), evaluator)
    if method == "KatzWeights":
        return weight_ordered(inst, katz_weights(inst, beta=katz_beta), evaluator)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _pool_map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def run_comparison(
    gen: GenConfig = GenConfig(),
    methods: Sequence[str] = METHODS,
    sampler: SamplerConfig | None = SamplerConfig(),
    n_instances: int = 100,
    seed: int = 0,
    anneal: AnnealConfig = AnnealConfig(),
    katz_beta: float = 1.0,
    threads: int = 1,
) -> BenchmarkReport:
    """Profit gain of each method over offering every product.

    ``sampler=None`` evaluates exactly. The full-assortment baseline is exact
    whenever ``n`` is within the enumeration limit, otherwise it is estimated
    with the shared sampler budget.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")

    def one(k: int) -> list[dict]:
        inst_seed = derive_seed(seed, k)
        inst = generate_instance(replace(gen, seed=inst_seed))
        everything = range(inst.n)
        if inst.n <= EXACT_LIMIT:
            base = expected_profit_exact(inst, everything)
        else:
            base = estimate_profit(inst, everything, with_seed(sampler, derive_seed(inst_seed, 1, 0)))[0]
        rows = []
        for mi, m in enumerate(methods):
            mseed = derive_seed(inst_seed, 2, mi)
            ev = (
                ExactEvaluator(inst)
                if sampler is None
                else SampledEvaluator(inst, with_seed(sampler, mseed))
            )
            t0 = time.perf_counter()
            res = _run_method(m, inst, ev, anneal, mseed, katz_beta)
            rows.append(
                {
                    "instance": k,
                    "method": m,
                    "gain": (res.value - base) / base,
                    "size": res.size,
                    "value": res.value,
                    "reference": float(base),
                    "runtime": time.perf_counter() - t0,
                }
            )
        return rows

    parts = _pool_map(one, range(n_instances), threads)
    cfg = {
        "gen": gen.to_dict(),
        "methods": list(methods),
        "sampler": None if sampler is None else sampler.to_dict(),
        "anneal": anneal.to_dict(),
        "n_instances": n_instances,
        "seed": seed,
        "katz_beta": katz_beta,
    }
    return BenchmarkReport("gain", [r for p in parts for r in p], cfg)


def run_optimality_gaps(
    n: int = 10,
    n_instances: int = 100,
    sa_variants: Sequence[int] = (250, 150, 50),
    seed: int = 0,
    methods: Sequence[str] = ("RevenueWeights", "ParameterWeights", "KatzWeights"),
    gen: GenConfig | None = None,
    anneal: AnnealConfig = AnnealConfig(),
    threads: int = 1,
) -> BenchmarkReport:
    """Relative gap to the brute-force optimum, exact evaluation throughout.

    Instances use the default generator with ``p_edge = 1`` unless ``gen`` is
    given. SA variants appear as ``SA(k=<k_temps>)``.
    """
    gen = gen or GenConfig(n=n, p_edge=1.0)
    gen = replace(gen, n=n)
    if n > 20:
        brute_force(generate_instance(gen))  # raises TooLarge

    def one(k: int) -> list[dict]:
        inst_seed = derive_seed(seed, k)
        inst = generate_instance(replace(gen, seed=inst_seed))
        opt = brute_force(inst)
        rows = []
        jobs = [(f"SA(k={kt})", "SA", replace(anneal, k_temps=kt)) for kt in sa_variants]
        jobs += [(m, m, anneal) for m in methods]
        for mi, (label, m, acfg) in enumerate(jobs):
            t0 = time.perf_counter()
            res = _run_method(m, inst, ExactEvaluator(inst), acfg, derive_seed(inst_seed, 2, mi), 1.0)
            gap = (opt.value - res.value) / opt.value if opt.value > 0 else 0.0
            rows.append(
                {
                    "instance": k,
                    "method": label,
                    "gap": gap,
                    "size": res.size,
                    "value": res.value,
                    "reference": opt.value,
                    "runtime": time.perf_counter() - t0,
                }
            )
        return rows

    parts = _pool_map(one, range(n_instances), threads)
    cfg = {
        "gen": gen.to_dict(),
        "sa_variants": list(sa_variants),
        "methods": list(methods),
        "anneal": anneal.to_dict(),
        "n_instances": n_instances,
        "seed": seed,
    }
    return BenchmarkReport("gap", [r for p in parts for r in p], cfg)


class Axis(str, enum.Enum):
    SAMPLES = "samples"
    TEMPS = "temps"
    PRODUCTS = "products"


@dataclass(frozen=True)
class TimingBase:
    n: int = 10
    k_temps: int = 100
    n_samples: int = 100
    burn_in: int = 100
    p_edge: float = 0.2


def run_timing(
    axis: Axis | str,
    grid: Sequence[int],
    base: TimingBase = TimingBase(),
    seed: int = 0,
    repeats: int = 1,
) -> list[tuple[int, float]]:
    """Wall time of one sampled SA run per grid point (best of ``repeats``).

    The instance is fixed across the Samples and Temps axes. Repeats sweep the
    whole grid round-robin, so a slow spell on a shared machine is spread over
    many grid points instead of inflating one.
    """
    axis = Axis(axis)
    grid = [int(g) for g in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be ascending")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    fixed = generate_instance(GenConfig(n=base.n, p_edge=base.p_edge, seed=derive_seed(seed, 0)))
    jobs = []
    for g in grid:
        n, k_temps, n_samples = base.n, base.k_temps, base.n_samples
        inst = fixed
        if axis is Axis.SAMPLES:
            n_samples = g
        elif axis is Axis.TEMPS:
            k_temps = g
        else:
            inst = generate_instance(GenConfig(n=g, p_edge=base.p_edge, seed=derive_seed(seed, 0)))
        sampler = SamplerConfig(n_samples=n_samples, burn_in=base.burn_in, seed=derive_seed(seed, 1))
        jobs.append((inst, AnnealConfig(k_temps=k_temps, seed=derive_seed(seed, 2), sampler=sampler)))
    best = [float("inf")] * len(grid)
    for _ in range(repeats):
        for k, (inst, cfg) in enumerate(jobs):
            t0 = time.perf_counter()
            simulated_annealing(inst, cfg)
            best[k] = min(best[k], time.perf_counter() - t0)
    return list(zip(grid, best))


def linear_fit_r2(points: Sequence[tuple[float, float]]) -> float:
    """R^2 of the least-squares line through ``points``."""
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    return 1.0 - float(np.sum(resid**2) / total) if total > 0 else 1.0
