"""Command-line front end.

Every command writes under ``--out`` using the layout ``models/``, ``results/``
and ``reports/`` plus a ``manifest_<command>.json`` describing the run.
Existing files are never overwritten unless ``--force`` is given.

Exit codes: 0 success, 1 output exists or replay mismatch, 2 unreadable input
or bad arguments, 3 estimator or sampler precondition failed, 4 an iterative
solver did not converge, 5 problem too large for exhaustive search.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import Domain, Instance, IsingModel, spin_to_binary
from .errors import (
    AssortmentTooLarge,
    DegenerateColumn,
    DimensionMismatch,
    EmptyAssortment,
    InnerSolveFailed,
    MomentOutOfRange,
    NonConvergence,
    ProductNotOffered,
    SingularSigma,
    TooLarge,
    WrongDomain,
)
from .estimation import DEFAULT_RHO, compute_moments, dc_estimate, sparse_mle_estimate
from .graph import build_graph, preprocess, write_decomposition, write_graph
from .lab import (
    METHODS,
    GenConfig,
    TimingBase,
    linear_fit_r2,
    run_comparison,
    run_optimality_gaps,
    run_timing,
)
from .optimizer import (
    AnnealConfig,
    ExactEvaluator,
    SampledEvaluator,
    brute_force,
    katz_weights,
    parameter_weights,
    revenue_weights,
    simulated_annealing,
    solve_decomposed,
    weight_ordered,
)
from .sampling import SamplerConfig, Scan, sample_baskets, write_batch
from .serialization import dumps, model_from_dict, model_to_dict, save_instance
from .transactions import TransactionParseError, read_transactions

PROG = "ising-assort"
AUTO_EXACT_MAX = 12


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Output:
    """Planned output files under one root; refuses to clobber without ``force``."""

    def __init__(self, root, force: bool):
        self.root = Path(root)
        self.force = force
        self.files: list[Path] = []
        self.volatile: set[str] = set()

    def plan(self, *relpaths: str) -> list[Path]:
        paths = [self.root / r for r in relpaths]
        if not self.force:
            taken = [str(p) for p in paths if p.exists()]
            if taken:
                raise CliError(1, f"output exists (use --force): {', '.join(taken)}")
        for p in paths:
            p.parent.mkdir(parents=True, exist_ok=True)
        self.files.extend(paths)
        return paths

    def digests(self) -> dict[str, str]:
        return {
            str(p.relative_to(self.root)): _sha256(p) for p in self.files if p.exists()
        }


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise CliError(2, f"{path}: no such file") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CliError(2, f"{path}: not valid JSON ({exc})") from exc


def _load_model(path) -> tuple[IsingModel, np.ndarray | None]:
    try:
        return model_from_dict(_load_json(path))
    except CliError:
        raise
    except (ValueError, TypeError) as exc:
        raise CliError(2, f"{path}: {exc}") from exc


def _load_profits(path, n: int) -> np.ndarray:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
        vals = doc["profits"] if isinstance(doc, dict) else doc
    except json.JSONDecodeError:
        vals = text.split()
    try:
        r = np.array([float(v) for v in vals])
    except (TypeError, ValueError) as exc:
        raise CliError(2, f"{path}: profits must be numbers ({exc})") from exc
    if r.shape != (n,):
        raise CliError(2, f"{path}: expected {n} profits, found {r.size}")
    return r


def _load_instance(path, profits_path=None, require_profits=True) -> Instance:
    model, profits = _load_model(path)
    if model.domain is Domain.SPIN:
        model = spin_to_binary(model)
    if profits_path is not None:
        profits = _load_profits(profits_path, model.n)
    if profits is None:
        if require_profits:
            raise CliError(2, f"{path}: no profits; pass --profits")
        profits = np.zeros(model.n)
    try:
        return Instance(model, profits)
    except ValueError as exc:
        raise CliError(2, f"{path}: {exc}") from exc


def _parse_assortment(text: str, n: int) -> list[int]:
    text = text.strip().lower()
    if text == "all":
        return list(range(n))
    if text in ("", "none"):
        return []
    try:
        items = sorted({int(v) for v in text.split(",")})
    except ValueError as exc:
        raise CliError(2, f"assortment must be comma-separated indices, 'all' or 'none': {text!r}") from exc
    bad = [i for i in items if not 0 <= i < n]
    if bad:
        raise CliError(2, f"assortment indices out of range 0..{n - 1}: {bad}")
    return items


def _sampler_from_args(args) -> SamplerConfig:
    return SamplerConfig(
        n_samples=args.samples,
        burn_in=args.burn_in,
        thinning=args.thinning,
        seed=args.seed,
        scan=Scan(args.scan),
        chains=args.chains,
    )


# -- commands ---------------------------------------------------------------


def cmd_estimate(args, out: Output) -> dict:
    try:
        data, ids = read_transactions(args.input)
    except FileNotFoundError as exc:
        raise CliError(2, f"{args.input}: no such file") from exc
    except TransactionParseError as exc:
        raise CliError(2, str(exc)) from exc
    spin_p, bin_p, mom_p, ids_p = out.plan(
        "models/spin_model.json",
        "models/binary_model.json",
        "models/moments.json",
        "models/id_map.json",
    )
    moments = compute_moments(data)
    info: dict = {"method": args.method, "baskets": data.m, "products": data.n}
    if args.method == "dc":
        spin = dc_estimate(moments)
    else:
        res = sparse_mle_estimate(moments, rho=args.rho, tol=args.tol, max_iter=args.max_iter)
        if not res.converged:
            raise CliError(4, f"sparse MLE did not converge in {args.max_iter} iterations")
        spin = res.model
        info.update(rho=args.rho, objective=res.objective, iterations=res.iterations)
    spin_p.write_text(dumps(model_to_dict(spin)))
    bin_p.write_text(dumps(model_to_dict(spin_to_binary(spin))))
    mom_p.write_text(
        dumps(
            {
                "m": moments.m,
                "mu": moments.mu.tolist(),
                "s": moments.s.tolist(),
                "ids": ids,
                "estimator": info,
            }
        )
    )
    ids_p.write_text(dumps({pid: k for k, pid in enumerate(ids)}))
    return {"inputs": [args.input]}


def cmd_preprocess(args, out: Output) -> dict:
    inst = _load_instance(args.model, args.profits, require_profits=False)
    dec = preprocess(inst, args.epsilon)
    names = ["results/decomposition.json", "reports/edges.csv", "reports/nodes.csv"]
    names += [f"models/subproblem_{k}.json" for k in range(len(dec.subproblems))]
    paths = out.plan(*names)
    write_decomposition(dec, paths[0])
    write_graph(build_graph(inst.model, args.epsilon), inst.profits, paths[1], paths[2])
    for sp, p in zip(dec.subproblems, paths[3:]):
        save_instance(p, sp.instance)
    print(
        f"forced in: {list(dec.forced_in)}; "
        f"subproblems: {[list(sp.indices) for sp in dec.subproblems]}"
    )
    return {"inputs": [p for p in (args.model, args.profits) if p]}


def _evaluator_kind(args, n: int) -> str:
    if args.evaluator == "auto":
        return "exact" if n <= AUTO_EXACT_MAX else "sampled"
    return args.evaluator


def cmd_optimize(args, out: Output) -> dict:
    inst = _load_instance(args.instance, args.profits)
    names = ["results/result.json"]
    if args.trace and args.method == "sa":
        names.append("results/trace.csv")
    paths = out.plan(*names)
    kind = "exact" if args.method == "brute" else _evaluator_kind(args, inst.n)
    sampler = _sampler_from_args(args)
    start = None if args.start is None else tuple(_parse_assortment(args.start, inst.n))
    anneal = AnnealConfig(
        k_temps=args.k_temps,
        p_min=args.p_min,
        p_max=args.p_max,
        d_obj=args.d_obj,
        start=start,
        seed=args.seed,
        sampler=None if kind == "exact" else sampler,
        trace=args.trace,
    )

    def evaluator_for(sub: Instance):
        return ExactEvaluator(sub) if kind == "exact" else SampledEvaluator(sub, sampler)

    def solve(sub: Instance):
        if args.method == "brute":
            return brute_force(sub)
        if args.method == "sa":
            cfg = anneal if sub is inst else replace(anneal, start=None)
            return simulated_annealing(sub, cfg, evaluator_for(sub))
        weights = {
            "revenue": revenue_weights,
            "param": parameter_weights,
            "katz": lambda i: katz_weights(i, args.alpha, args.beta),
        }[args.method](sub)
        return weight_ordered(sub, weights, evaluator_for(sub))

    if args.preprocess:
        res = solve_decomposed(inst, solve, args.epsilon, evaluator_for(inst))
    else:
        res = solve(inst)
    doc = res.to_dict()
    doc["config"] = {
        "method": args.method,
        "evaluator": kind,
        "sampler": sampler.to_dict() if kind == "sampled" else None,
        "anneal": anneal.to_dict() if args.method == "sa" else None,
        "alpha": args.alpha,
        "beta": args.beta,
        "preprocess": args.preprocess,
        "epsilon": args.epsilon,
    }
    if kind == "sampled":
        doc["config"]["final_value"] = "re-estimated once with 4x samples"
    paths[0].write_text(dumps(doc))
    if len(paths) > 1:
        res.write_trace(paths[1])
    print(f"assortment {list(res.assortment)} value {res.value:.6g}")
    return {"inputs": [p for p in (args.instance, args.profits) if p], "seeds": {"seed": args.seed}}


def cmd_simulate(args, out: Output) -> dict:
    model, _ = _load_model(args.model)
    if model.domain is Domain.SPIN:
        model = spin_to_binary(model)
    s = _parse_assortment(args.assortment, model.n)
    csv_p, _ = out.plan("results/baskets.csv", "results/baskets.json")
    batch = sample_baskets(model, s, _sampler_from_args(args), threads=args.threads)
    write_batch(batch, csv_p)
    return {"inputs": [args.model], "seeds": {"seed": args.seed}}


def _pick(cfg: dict, key: str, default):
    return cfg.get(key, default)


def cmd_benchmark(args, out: Output) -> dict:
    cfg = _load_json(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise CliError(2, f"{args.config}: expected a JSON object")
    scale = args.full_scale
    seed = int(_pick(cfg, "seed", args.seed))
    if args.suite == "timing":
        paths = out.plan("reports/timing.csv", "reports/timing_summary.json")
        out.volatile.update(str(p.relative_to(out.root)) for p in paths)
        axis = _pick(cfg, "axis", "samples")
        grid = _pick(cfg, "grid", [1000 * k for k in range(1, 11)] if axis == "samples" else [100 * k for k in range(1, 11)])
        base = TimingBase(**_pick(cfg, "base", {}))
        pts = run_timing(axis, grid, base, seed, repeats=int(_pick(cfg, "repeats", 5)))
        paths[0].write_text(
            "value,seconds\n" + "".join(f"{g},{t!r}\n" for g, t in pts)
        )
        summary = {"axis": axis, "grid": list(grid), "r2": linear_fit_r2(pts), "seed": seed}
        paths[1].write_text(dumps(summary))
        print(f"{axis}: R^2 = {summary['r2']:.4f}")
        return {"inputs": [args.config] if args.config else [], "seeds": {"seed": seed}}

    stem = args.suite
    names = [f"reports/{stem}{suffix}" for suffix in (".csv", "_long.csv", "_summary.json", "_timings.csv")]
    out.plan(*names)
    out.volatile.add(f"reports/{stem}_timings.csv")
    if args.suite == "comparison":
        gen = GenConfig(**_pick(cfg, "gen", {}))
        n_samples = int(_pick(cfg, "n_samples", 10_000 if scale else 2_000))
        k_temps = int(_pick(cfg, "k_temps", 10_000 if scale else 2_000))
        sampler = SamplerConfig(n_samples=n_samples, burn_in=int(_pick(cfg, "burn_in", 100)))
        report = run_comparison(
            gen,
            methods=tuple(_pick(cfg, "methods", METHODS)),
            sampler=sampler,
            n_instances=int(_pick(cfg, "n_instances", 100 if scale else 10)),
            seed=seed,
            anneal=AnnealConfig(k_temps=k_temps),
            threads=args.threads,
        )
    else:
        report = run_optimality_gaps(
            n=int(_pick(cfg, "n", 10)),
            n_instances=int(_pick(cfg, "n_instances", 100)),
            sa_variants=tuple(_pick(cfg, "sa_variants", (250, 150, 50))),
            seed=seed,
            threads=args.threads,
        )
    report.write(out.root / "reports", stem)
    for method, agg in report.aggregates().items():
        print(
            f"{method:>18}: mean {report.metric} {100 * agg['mean_' + report.metric]:.2f}% "
            f"mean size {agg['mean_size']:.1f}"
        )
    return {"inputs": [args.config] if args.config else [], "seeds": {"seed": seed}}


def _strip_out_args(argv: list[str]) -> list[str]:
    kept, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in ("--out", "--threads"):
            skip = True
            continue
        if a == "--force" or a.startswith(("--out=", "--threads=")):
            continue
        kept.append(a)
    return kept


def cmd_replay(args) -> int:
    manifest = _load_json(args.manifest)
    try:
        argv = list(manifest["argv"])
        expected = dict(manifest["outputs"])
        volatile = set(manifest.get("volatile", []))
    except (KeyError, TypeError) as exc:
        raise CliError(2, f"{args.manifest}: not a run manifest ({exc})") from exc
    code = main(argv + ["--out", args.out, "--force"])
    if code != 0:
        return code
    fresh = _load_json(Path(args.out) / f"manifest_{manifest['command']}.json")["outputs"]
    bad = [
        name
        for name, digest in expected.items()
        if name not in volatile and fresh.get(name) != digest
    ]
    for name in bad:
        print(f"mismatch: {name}", file=sys.stderr)
    checked = len([n for n in expected if n not in volatile])
    print(f"replay: {checked - len(bad)}/{checked} outputs reproduced")
    return 1 if bad else 0


# -- parser -----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output root directory (default: %(default)s)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads (default: available cores, %(default)s)",
    )


def _add_sampler(p: argparse.ArgumentParser, samples_default: int = 10_000) -> None:
    g = p.add_argument_group("sampler")
    g.add_argument("--samples", type=int, default=samples_default, help="retained baskets per estimate (default: %(default)s)")
    g.add_argument("--burn-in", type=int, default=100, help="discarded sweeps per chain (default: %(default)s)")
    g.add_argument("--thinning", type=int, default=1, help="sweeps between retained baskets (default: %(default)s)")
    g.add_argument("--chains", type=int, default=1, help="independent chains (default: %(default)s)")
    g.add_argument("--scan", choices=[s.value for s in Scan], default="systematic", help="update order (default: %(default)s)")
    g.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Ising-model multi-purchase choice: estimation, sampling and assortment optimization.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit a model from transaction data")
    p.add_argument("input", help="transaction file (.csv 0/1 matrix, or one basket of ids per line)")
    p.add_argument("--method", choices=["dc", "sparse-mle"], default="dc", help="estimator (default: %(default)s)")
    p.add_argument("--rho", type=float, default=DEFAULT_RHO, help="l1 penalty for sparse-mle (default: %(default)s)")
    p.add_argument("--tol", type=float, default=1e-6, help="sparse-mle step tolerance (default: %(default)s)")
    p.add_argument("--max-iter", type=int, default=5000, help="sparse-mle iteration cap (default: %(default)s)")
    _add_common(p)

    p = sub.add_parser("preprocess", help="split a model into forced products and subproblems")
    p.add_argument("model", help="model or instance JSON")
    p.add_argument("--profits", help="profits file (JSON list or whitespace-separated numbers)")
    p.add_argument("--epsilon", type=float, default=0.0, help="edge threshold |theta_ij| > epsilon (default: %(default)s)")
    _add_common(p)

    p = sub.add_parser("optimize", help="choose an assortment")
    p.add_argument("instance", help="instance JSON (model with profits)")
    p.add_argument("--profits", help="profits file overriding those in the instance")
    p.add_argument("--method", choices=["brute", "sa", "revenue", "param", "katz"], default="sa", help="(default: %(default)s)")
    p.add_argument(
        "--evaluator",
        choices=["auto", "exact", "sampled"],
        default="auto",
        help=f"profit evaluation; auto is exact for n <= {AUTO_EXACT_MAX} (default: %(default)s)",
    )
    p.add_argument("--k-temps", type=int, default=10_000, help="annealing temperatures (default: %(default)s)")
    p.add_argument("--p-min", type=float, default=0.001, help="final target acceptance probability (default: %(default)s)")
    p.add_argument("--p-max", type=float, default=0.999, help="initial target acceptance probability (default: %(default)s)")
    p.add_argument("--d-obj", type=float, default=0.25, help="typical objective change (default: %(default)s)")
    p.add_argument("--start", help="annealing start: indices, 'all' or 'none' (default: all)")
    p.add_argument("--alpha", type=float, help="Katz attenuation (default: 1/lambda_max - 0.01)")
    p.add_argument("--beta", type=float, default=1.0, help="Katz baseline (default: %(default)s)")
    p.add_argument("--trace", action="store_true", help="also write the annealing trace CSV")
    p.add_argument("--preprocess", action="store_true", help="solve each subproblem separately")
    p.add_argument("--epsilon", type=float, default=0.0, help="edge threshold for --preprocess (default: %(default)s)")
    _add_sampler(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="draw baskets with the Gibbs sampler")
    p.add_argument("model", help="model JSON (spin models are converted to binary)")
    p.add_argument("--assortment", default="all", help="offered indices, comma-separated, or 'all' (default: %(default)s)")
    _add_sampler(p)
    _add_common(p)

    p = sub.add_parser("benchmark", help="run a benchmark suite")
    p.add_argument("suite", choices=["comparison", "gaps", "timing"])
    p.add_argument("--config", help="JSON overrides for the suite")
    p.add_argument("--full-scale", action="store_true", help="comparison: 100 instances, 10k temps x 10k samples")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    _add_common(p)

    p = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    p.add_argument("manifest", help="manifest_<command>.json from an earlier run")
    p.add_argument("--out", required=True, help="fresh output root for the replay")
    return parser


COMMANDS = {
    "estimate": cmd_estimate,
    "preprocess": cmd_preprocess,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
}

_EXIT = [
    ((DegenerateColumn, MomentOutOfRange, SingularSigma, EmptyAssortment, WrongDomain,
      DimensionMismatch, ProductNotOffered), 3),
    ((NonConvergence, InnerSolveFailed), 4),
    ((TooLarge, AssortmentTooLarge), 5),
]


def _run(args, argv: list[str]) -> int:
    if args.command == "replay":
        return cmd_replay(args)
    out = Output(args.out, args.force)
    out.plan(f"manifest_{args.command}.json")
    t0 = time.perf_counter()
    extra = COMMANDS[args.command](args, out)
    wall = time.perf_counter() - t0
    manifest_path = out.files[0]
    out.files = out.files[1:]
    config = {k: v for k, v in vars(args).items() if k not in ("out", "force", "threads")}
    manifest = {
        "command": args.command,
        "argv": _strip_out_args(argv),
        "config": config,
        "seeds": extra.get("seeds", {}),
        "inputs": {str(p): _sha256(p) for p in extra.get("inputs", [])},
        "outputs": out.digests(),
        "volatile": sorted(out.volatile),
        "version": __version__,
        "wall_time": wall,
    }
    manifest_path.write_text(dumps(manifest))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(args, argv)
    except CliError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:
        for types, code in _EXIT:
            if isinstance(exc, types):
                print(f"{PROG}: error: {exc}", file=sys.stderr)
                return code
        if isinstance(exc, ValueError):
            print(f"{PROG}: error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
