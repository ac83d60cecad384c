#!/usr/bin/env python3
"""
Bipartite graphs as carriers of correlated messages.

A message pair (W1, W2) is an edge of G = (V1, V2, E); pairs are drawn
uniformly over E. Graphs are immutable: the edge list is kept sorted and
deduplicated together with compressed adjacency for both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import SEMI_REGULAR_SLACK, setup_logging
from errors import ArgumentError
from json_utils import read_csv_rows, write_csv

logger = setup_logging("bigraph")


# ============================================================================
# GRAPH
# ============================================================================


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Vertex sets {0..n1-1} and {0..n2-1} with an (E, 2) edge array."""

    n1: int
    n2: int
    edges: np.ndarray
    _adj1: Tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)
    _adj2: Tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n1 < 0 or self.n2 < 0:
            raise ArgumentError("vertex set sizes must be nonnegative")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (
            edges[:, 0].min() < 0
            or edges[:, 0].max() >= self.n1
            or edges[:, 1].min() < 0
            or edges[:, 1].max() >= self.n2
        ):
            raise ArgumentError(
                f"edge endpoint out of range for a {self.n1} x {self.n2} graph"
            )
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        if edges.shape[0] > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise ArgumentError("duplicate edges")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

        deg1 = np.bincount(edges[:, 0], minlength=self.n1)
        indptr1 = np.concatenate(([0], np.cumsum(deg1)))
        object.__setattr__(self, "_adj1", (indptr1, edges[:, 1].copy()))

        by_second = np.lexsort((edges[:, 0], edges[:, 1]))
        deg2 = np.bincount(edges[:, 1], minlength=self.n2)
        indptr2 = np.concatenate(([0], np.cumsum(deg2)))
        object.__setattr__(self, "_adj2", (indptr2, edges[by_second, 0]))

    # ---- constructors -------------------------------------------------------

    @classmethod
    def from_edges(
        cls, n1: int, n2: int, edges: Iterable[Sequence[int]], dedupe: bool = True
    ) -> "BipartiteGraph":
        array = np.asarray([tuple(e) for e in edges], dtype=np.int64).reshape(-1, 2)
        if dedupe and array.size:
            array = np.unique(array, axis=0)
        return cls(n1, n2, array)

    @classmethod
    def complete(cls, n1: int, n2: int) -> "BipartiteGraph":
        i, j = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        return cls(n1, n2, np.stack([i.ravel(), j.ravel()], axis=1))

    # ---- queries ------------------------------------------------------------

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def neighbors1(self, u: int) -> np.ndarray:
        """Second-side neighbours of first-side vertex u."""
        indptr, idx = self._adj1
        return idx[indptr[u] : indptr[u + 1]]

    def neighbors2(self, v: int) -> np.ndarray:
        """First-side neighbours of second-side vertex v."""
        indptr, idx = self._adj2
        return idx[indptr[v] : indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        if not (0 <= u < self.n1 and 0 <= v < self.n2):
            return False
        row = self.neighbors1(u)
        pos = int(np.searchsorted(row, v))
        return pos < row.size and int(row[pos]) == v

    def summary(self) -> Dict[str, Any]:
        deg1, deg2 = degrees(self)
        return {
            "n1": self.n1,
            "n2": self.n2,
            "edges": self.edge_count,
            "min_degree1": int(deg1.min()) if deg1.size else 0,
            "max_degree1": int(deg1.max()) if deg1.size else 0,
            "min_degree2": int(deg2.min()) if deg2.size else 0,
            "max_degree2": int(deg2.max()) if deg2.size else 0,
        }

    def to_csv(self, path: Path, cfg_hash: str, seed: Optional[int]) -> None:
        write_csv(path, ["side1", "side2"], self.edges.tolist(), cfg_hash, seed)

    @classmethod
    def from_csv(cls, path: Path, n1: int, n2: int) -> "BipartiteGraph":
        rows = read_csv_rows(path)
        try:
            edges = [(int(r["side1"]), int(r["side2"])) for r in rows]
        except (KeyError, ValueError) as exc:
            raise ArgumentError(f"bad edge CSV {path}: {exc}") from exc
        return cls.from_edges(n1, n2, edges)

    def __repr__(self) -> str:
        return f"BipartiteGraph({self.n1}x{self.n2}, |E|={self.edge_count})"


def degrees(g: BipartiteGraph) -> Tuple[np.ndarray, np.ndarray]:
    """Per-vertex degrees (first side, second side)."""
    deg1 = np.diff(g._adj1[0])
    deg2 = np.diff(g._adj2[0])
    return deg1, deg2


def edge_marginals(g: BipartiteGraph) -> Tuple[np.ndarray, np.ndarray]:
    """Marginal message distributions under edge-uniform sampling: deg / |E|."""
    if g.edge_count == 0:
        raise ArgumentError("edge marginals need at least one edge")
    deg1, deg2 = degrees(g)
    return deg1 / g.edge_count, deg2 / g.edge_count


# ============================================================================
# NEARLY SEMI-REGULAR CHECK
# ============================================================================


@dataclass(frozen=True)
class SemiRegularParams:
    """(Delta1, Delta2, Delta1', Delta2', mu)."""

    delta1: int
    delta2: int
    delta1p: float
    delta2p: float
    mu: float

    def __post_init__(self) -> None:
        if self.delta1 < 1 or self.delta2 < 1:
            raise ArgumentError("vertex set sizes must be >= 1")
        if not (self.delta1p > 0 and self.delta2p > 0):
            raise ArgumentError("nominal degrees must be positive")
        if not self.mu >= 1:
            raise ArgumentError(f"slackness mu must be >= 1, got {self.mu}")

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.delta1, self.delta2, self.delta1p, self.delta2p, self.mu)

    def to_dict(self) -> Dict[str, float]:
        return {
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta1p": self.delta1p,
            "delta2p": self.delta2p,
            "mu": self.mu,
        }


@dataclass(frozen=True)
class Violation:
    """One failed condition of the nearly semi-regular check."""

    kind: str  # "size1", "size2", "degree1", "degree2"
    vertex: Optional[int]
    value: int
    lower: float
    upper: float

    def describe(self) -> str:
        if self.vertex is None:
            return f"{self.kind}: {self.value} != {self.lower:g}"
        return (
            f"{self.kind} vertex {self.vertex}: degree {self.value} "
            f"outside [{self.lower:g}, {self.upper:g}]"
        )


@dataclass(frozen=True)
class SemiRegularReport:
    ok: bool
    violations: Tuple[Violation, ...]

    def violating_vertices(self, side: int) -> List[int]:
        kind = f"degree{side}"
        return [v.vertex for v in self.violations if v.kind == kind and v.vertex is not None]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nearly_semi_regular": self.ok,
            "violations": [v.describe() for v in self.violations],
        }


def _is_power_of_two(x: float) -> bool:
    if not (x > 0 and math.isfinite(x)):
        return False
    mantissa, _ = math.frexp(x)
    return mantissa == 0.5


def _degree_window(nominal: float, mu: float) -> Tuple[Any, Any, Any]:
    """(lower, upper, comparator slack) for degrees around ``nominal``."""
    if _is_power_of_two(nominal) and _is_power_of_two(mu):
        return Fraction(nominal) / Fraction(mu), Fraction(nominal) * Fraction(mu), 0
    return nominal / mu, nominal * mu, SEMI_REGULAR_SLACK


def _side_violations(
    kind: str, degs: np.ndarray, nominal: float, mu: float
) -> List[Violation]:
    lower, upper, slack = _degree_window(nominal, mu)
    if slack == 0:
        bad = [
            u
            for u, d in enumerate(degs.tolist())
            if not (lower <= Fraction(d) <= upper)
        ]
    else:
        lo = float(lower) * (1 - slack)
        hi = float(upper) * (1 + slack)
        bad = np.flatnonzero((degs < lo) | (degs > hi)).tolist()
    return [
        Violation(kind, int(u), int(degs[u]), float(lower), float(upper)) for u in bad
    ]


def check_nearly_semi_regular(
    g: BipartiteGraph, p: SemiRegularParams
) -> SemiRegularReport:
    """Sizes equal (Delta1, Delta2); first-side degrees in [Delta2'/mu, Delta2' mu];
    second-side degrees in [Delta1'/mu, Delta1' mu]."""
    violations: List[Violation] = []
    if g.n1 != p.delta1:
        violations.append(Violation("size1", None, g.n1, p.delta1, p.delta1))
    if g.n2 != p.delta2:
        violations.append(Violation("size2", None, g.n2, p.delta2, p.delta2))
    deg1, deg2 = degrees(g)
    violations.extend(_side_violations("degree1", deg1, p.delta2p, p.mu))
    violations.extend(_side_violations("degree2", deg2, p.delta1p, p.mu))
    return SemiRegularReport(not violations, tuple(violations))


def graph_parameters(
    n: int, rates: Sequence[float], eps_prime: float
) -> SemiRegularParams:
    """Nominal (2^{nR1}, 2^{nR2}, 2^{nR1'}, 2^{nR2'}, 2^{n eps'}) for a rate point.

    Vertex-set sizes are the integer bin counts 2^{ceil(nR)}.
    """
    r1, r2, r1p, r2p = (float(r) for r in rates)
    return SemiRegularParams(
        delta1=bin_count(n, r1),
        delta2=bin_count(n, r2),
        delta1p=2.0 ** (n * r1p),
        delta2p=2.0 ** (n * r2p),
        mu=2.0 ** (n * eps_prime),
    )


def bin_count(n: int, rate: float) -> int:
    """2^{ceil(n R)}, with a small tolerance so exact integers stay put."""
    return 2 ** max(0, math.ceil(n * rate - 1e-9))


def rate_conditions(
    params: SemiRegularParams, n: int, rates: Sequence[float], eps: float
) -> Dict[str, Dict[str, Any]]:
    """Check (1/n) log2 of each graph parameter against R + eps (and mu against eps)."""
    r1, r2, r1p, r2p = (float(r) for r in rates)
    checks = {
        "delta1": (params.delta1, r1 + eps),
        "delta2": (params.delta2, r2 + eps),
        "delta1p": (params.delta1p, r1p + eps),
        "delta2p": (params.delta2p, r2p + eps),
        "mu": (params.mu, eps),
    }
    report: Dict[str, Dict[str, Any]] = {}
    for name, (value, bound) in checks.items():
        exponent = math.log2(value) / n
        report[name] = {"exponent": exponent, "bound": bound, "ok": exponent < bound}
    return report


# ============================================================================
# SAMPLING
# ============================================================================


class EdgeSampler:
    """Seeded sampler of edges, uniform over E(G)."""

    def __init__(self, g: BipartiteGraph, seed: Union[int, np.random.SeedSequence]):
        if g.edge_count == 0:
            raise ArgumentError("cannot sample from a graph with no edges")
        self.graph = g
        self.rng = np.random.default_rng(seed)

    def draw(self) -> Tuple[int, int]:
        idx = int(self.rng.integers(self.graph.edge_count))
        u, v = self.graph.edges[idx]
        return int(u), int(v)

    def draw_many(self, k: int) -> np.ndarray:
        """(k, 2) array of edges."""
        idx = self.rng.integers(self.graph.edge_count, size=k)
        return self.graph.edges[idx]


def uniform_edge_sampler(
    g: BipartiteGraph, seed: Union[int, np.random.SeedSequence]
) -> Tuple[int, int]:
    """One edge drawn uniformly over E(G); deterministic given the seed."""
    return EdgeSampler(g, seed).draw()


def reference_graphs() -> Dict[str, BipartiteGraph]:
    """The 3x3 reference graphs: complete, 6-cycle and perfect matching."""
    return {
        "complete": BipartiteGraph.complete(3, 3),
        "cycle": BipartiteGraph.from_edges(
            3, 3, [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)]
        ),
        "matching": BipartiteGraph.from_edges(3, 3, [(0, 0), (1, 1), (2, 2)]),
    }
