"""Graph view of a binary model: decomposition, edge removal and Katz centrality.

Nodes are products, node weights are ``theta_ii`` and an edge ``(i, j)``
carries ``theta_ij`` whenever ``|theta_ij| > epsilon``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .core import Domain, Instance, IsingModel
from .errors import NonConvergence, WrongDomain


@dataclass(frozen=True, eq=False)
class ProductGraph:
    n: int
    edges: tuple[tuple[int, int, float], ...]
    node_weights: np.ndarray

    def adjacency(self) -> np.ndarray:
        """Dense signed weighted adjacency matrix (zero diagonal)."""
        a = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            a[i, j] = a[j, i] = w
        return a

    def degree(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for i, j, _ in self.edges:
            d[i] += 1
            d[j] += 1
        return d


def build_graph(model: IsingModel, epsilon: float = 0.0) -> ProductGraph:
    if model.domain is not Domain.BINARY:
        raise WrongDomain("graphs are built from binary-domain parameters")
    t = model.theta
    iu, ju = np.triu_indices(model.n, 1)
    keep = np.abs(t[iu, ju]) > epsilon
    edges = tuple(
        (int(i), int(j), float(t[i, j])) for i, j in zip(iu[keep], ju[keep])
    )
    return ProductGraph(model.n, edges, np.diag(t).copy())


def connected_components(graph: ProductGraph) -> list[list[int]]:
    """Components as sorted index lists, ordered by smallest member."""
    if graph.edges:
        e = np.array([(i, j) for i, j, _ in graph.edges])
        adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(graph.n, graph.n))
    else:
        adj = coo_matrix((graph.n, graph.n))
    _, labels = _cc(adj, directed=False)
    groups: dict[int, list[int]] = {}
    for node, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(node)
    return sorted(groups.values(), key=lambda g: g[0])


@dataclass(frozen=True)
class Subproblem:
    indices: tuple[int, ...]  # original product ids, ascending
    instance: Instance


@dataclass(frozen=True)
class Decomposition:
    forced_in: tuple[int, ...]
    subproblems: tuple[Subproblem, ...] = field(default_factory=tuple)

    def merge(self, local_assortments) -> list[int]:
        """Map per-subproblem solutions back to original ids and add forced products."""
        out = set(self.forced_in)
        for sub, local in zip(self.subproblems, local_assortments):
            out.update(sub.indices[k] for k in local)
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "forced_in": list(self.forced_in),
            "subproblems": [
                {"indices": list(sp.indices), "size": len(sp.indices)}
                for sp in self.subproblems
            ],
        }


def preprocess(instance: Instance, epsilon: float = 0.0) -> Decomposition:
    """Split an instance into forced products and independent subproblems.

    Isolated products and whole components without a negative edge are always
    part of an optimal assortment; every other component is an independent
    subproblem.
    """
    graph = build_graph(instance.model, epsilon)
    negative = set()
    for i, j, w in graph.edges:
        if w < 0:
            negative.update((i, j))
    forced: list[int] = []
    subs: list[Subproblem] = []
    for comp in connected_components(graph):
        if len(comp) == 1 or not negative.intersection(comp):
            forced.extend(comp)
            continue
        subs.append(Subproblem(tuple(comp), instance.restrict(comp)))
    return Decomposition(tuple(sorted(forced)), tuple(subs))


def isolated_node_curve(graph: ProductGraph, fractions) -> list[tuple[float, int]]:
    """Isolated-node count after removing the lightest ``floor(f * |E|)`` edges.

    Edges are ordered by ``|weight|`` with ties broken by ``(i, j)``.
    """
    fr = [float(f) for f in fractions]
    if any(b < a for a, b in zip(fr, fr[1:])):
        raise ValueError("fractions must be sorted ascending")
    if any(f < 0 or f > 1 for f in fr):
        raise ValueError("fractions must lie in [0, 1]")
    order = sorted(graph.edges, key=lambda e: (abs(e[2]), e[0], e[1]))
    total = len(order)
    out = []
    for f in fr:
        cut = int(np.floor(f * total + 1e-12))
        deg = np.zeros(graph.n, dtype=np.int64)
        for i, j, _ in order[cut:]:
            deg[i] += 1
            deg[j] += 1
        out.append((f, int(np.sum(deg == 0))))
    return out


def spectral_radius(graph: ProductGraph, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest |eigenvalue| of the signed adjacency, by power iteration.

    Iterates on ``A @ A`` so that a +/- pair of dominant eigenvalues (always the
    case for bipartite pieces) cannot make the iteration oscillate.
    """
    if not graph.edges:
        return 0.0
    a = graph.adjacency()
    x = np.ones(graph.n) + np.linspace(0.0, 0.5, graph.n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = a @ (a @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new = float(np.sqrt(ny))
        x = y / ny
        if abs(new - est) <= tol * new:
            return float(np.linalg.norm(a @ x))
        est = new
    raise NonConvergence("power iteration did not converge")


def default_katz_alpha(graph: ProductGraph, margin: float = 0.01) -> float:
    """``1 / lambda_max - margin``, falling back to ``0.99 / lambda_max`` if non-positive."""
    lam = spectral_radius(graph)
    if lam == 0.0:
        return 1.0
    alpha = 1.0 / lam - margin
    return alpha if alpha > 0 else 0.99 / lam


def katz_centrality(
    graph: ProductGraph,
    alpha: float,
    beta: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Fixed point of ``c = alpha * A @ c + beta`` by Jacobi iteration.

    Signed weights are used as-is, so scores may be negative.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    a = graph.adjacency()
    c = np.full(graph.n, float(beta))
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            new = alpha * (a @ c) + beta
        if not np.all(np.isfinite(new)):
            raise NonConvergence("Katz iteration diverged; alpha is too large")
        delta = float(np.max(np.abs(new - c)))
        c = new
        if delta <= tol:
            return c
    raise NonConvergence(f"Katz iteration did not converge in {max_iter} steps")


def katz_dense(graph: ProductGraph, alpha: float, beta: float = 1.0) -> np.ndarray:
    """Direct linear solve of ``(I - alpha A) c = beta 1``."""
    a = graph.adjacency()
    return np.linalg.solve(np.eye(graph.n) - alpha * a, np.full(graph.n, float(beta)))


def write_graph(graph: ProductGraph, profits, edges_path, nodes_path) -> None:
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "weight"])
        for i, j, wt in graph.edges:
            w.writerow([i, j, repr(float(wt))])
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "theta_ii", "profit"])
        for k in range(graph.n):
            w.writerow([k, repr(float(graph.node_weights[k])), repr(float(profits[k]))])


def write_decomposition(dec: Decomposition, path) -> None:
    Path(path).write_text(json.dumps(dec.to_dict(), indent=1) + "\n")
