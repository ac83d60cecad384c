#!/usr/bin/env python3
"""
Rate-distortion region with one lossless and one lossy source.

The region is the union over test channels p(v|x2) (with X1 -> X2 -> V) of

    R_i >= R_i' >= 0,  R1' >= H(X1|V),  R2' >= I(V;X2|X1),
    R1 + R2' = R1' + R2 >= H(X1) + I(V;X2|X1),

subject to some reconstruction x2_hat(x1, v) meeting E d(X2, X2_hat) <= D.

The solver scans a simplex grid of resolution 1/g over every row p(.|x2).
All quantities are sums over v of functions of one column c_v = p(v|.):

    I(V;X2|X1) = sum_v phi(c_v),  I(X1;V) = sum_v chi(c_v),
    min over recon of E d = sum_v psi(c_v),

so phi, chi and psi are tabulated once over {0..g}^{|X2|} and every grid
cell is scored by table lookups. Relabelling V permutes the columns, so the
row of x2 = 0 is restricted to non-increasing compositions.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from config import (
    DEFAULT_GRID,
    DEFAULT_WORKERS,
    FEASIBILITY_TOLERANCE,
    GRID_BLOCK_CELLS,
    GRID_CELL_CAP,
    MARKOV_IDENTITY_TOLERANCE,
    RECON_ENUMERATION_CAP,
    RECON_SEARCH_MODES,
    SUM_RATE_EQUALITY_TOLERANCE,
    setup_logging,
)
from errors import ArgumentError, CapacityError, ConfigurationError, InfeasibleError
from logging_utils import (
    ErrorCollector,
    StructuredLogger,
    log_operation,
    log_performance_metrics,
)
from probcore import (
    LN2,
    Alphabet,
    CondPMF,
    JointPMF,
    compose_markov,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    information_summary,
    mutual_information,
)

logger = setup_logging("region")
slog = StructuredLogger("region")


# ============================================================================
# TYPES
# ============================================================================


@dataclass(frozen=True)
class RatePoint:
    """(R1, R2, R1', R2', D) in bits per sample and distortion units."""

    r1: float
    r2: float
    r1p: float
    r2p: float
    d: float

    @property
    def sum_rate(self) -> float:
        return self.r1 + self.r2p

    def sums_match(self, tol: float = SUM_RATE_EQUALITY_TOLERANCE) -> bool:
        return abs((self.r1 + self.r2p) - (self.r1p + self.r2)) <= tol

    def shifted(self, delta: float) -> "RatePoint":
        """Every rate moved by ``delta`` (the sum constraint is preserved)."""
        return RatePoint(
            self.r1 + delta, self.r2 + delta, self.r1p + delta, self.r2p + delta, self.d
        )

    def rates(self) -> Tuple[float, float, float, float]:
        return (self.r1, self.r2, self.r1p, self.r2p)

    def to_dict(self) -> Dict[str, float]:
        return {"R1": self.r1, "R2": self.r2, "R1p": self.r1p, "R2p": self.r2p, "D": self.d}


@dataclass(frozen=True)
class SolverParams:
    """Grid resolution, |V|, reconstruction search mode, workers, tolerance."""

    grid: int = DEFAULT_GRID
    v_size: Optional[int] = None
    recon_search: str = "pointwise"
    workers: Optional[int] = None
    tolerance: float = FEASIBILITY_TOLERANCE

    def __post_init__(self) -> None:
        if not isinstance(self.grid, (int, np.integer)) or self.grid < 1:
            raise ConfigurationError(f"must be a positive integer, got {self.grid}", "grid")
        if self.v_size is not None and self.v_size < 1:
            raise ConfigurationError(f"must be >= 1, got {self.v_size}", "v_size")
        if self.recon_search not in RECON_SEARCH_MODES:
            raise ConfigurationError(
                f"must be one of {RECON_SEARCH_MODES}, got {self.recon_search!r}",
                "recon_search",
            )
        if not self.tolerance >= 0:
            raise ConfigurationError(f"must be >= 0, got {self.tolerance}", "tolerance")


@dataclass
class RegionSolution:
    """Minimising test channel, reconstruction and the resulting rates."""

    aux: CondPMF
    joint: JointPMF  # p(x1, x2, v)
    recon: np.ndarray  # (|X1|, |V|) reconstruction symbol indices
    sum_rate: float
    achieved_d: float
    d_constraint: float
    info: Dict[str, float]
    grid: int
    cells_scanned: int
    n_recon: int = 0  # reconstruction alphabet size
    corner_points: Dict[str, RatePoint] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "D": self.d_constraint,
            "sum_rate": self.sum_rate,
            "achieved_d": self.achieved_d,
            "grid": self.grid,
            "cells_scanned": self.cells_scanned,
            "info": dict(self.info),
            "aux": self.aux.to_dict(),
            "recon": self.recon.tolist(),
            "corner_points": {k: p.to_dict() for k, p in self.corner_points.items()},
        }


# ============================================================================
# SINGLE-CHANNEL EVALUATION
# ============================================================================


def sum_rate(source: JointPMF, aux: CondPMF) -> float:
    """H(X1) + I(V;X2) - I(X1;V) on the composed joint."""
    joint = compose_markov(source, aux)
    direct = entropy(joint, 0) + mutual_information(joint, 2, 1) - mutual_information(joint, 0, 2)
    chain = entropy(joint, 0) + conditional_mutual_information(joint, 2, 1, 0)
    if abs(direct - chain) > MARKOV_IDENTITY_TOLERANCE:
        logger.warning("Sum-rate forms disagree: %.12f vs %.12f", direct, chain)
    return direct


def _check_distortion(source: JointPMF, d_x2: Any) -> np.ndarray:
    d = np.asarray(d_x2, dtype=float)
    if d.ndim != 2 or d.shape[0] != source.shape[1]:
        raise ConfigurationError(
            f"distortion matrix has shape {d.shape}, expected ({source.shape[1]}, k)",
            "distortion",
        )
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ConfigurationError("entries must be finite and nonnegative", "distortion")
    return d


def expected_distortion(
    source: JointPMF, aux: CondPMF, recon: Any, d_x2: Any
) -> float:
    """Sum over (x1, x2, v) of p(x1, x2, v) d(x2, recon(x1, v))."""
    d = _check_distortion(source, d_x2)
    joint = compose_markov(source, aux)
    table = np.asarray(recon, dtype=np.int64)
    if table.shape != (joint.shape[0], joint.shape[2]):
        raise ArgumentError(
            f"reconstruction table has shape {table.shape}, expected "
            f"{(joint.shape[0], joint.shape[2])}"
        )
    if table.min() < 0 or table.max() >= d.shape[1]:
        raise ArgumentError("reconstruction symbol outside the distortion columns")
    x1, x2, v = np.indices(joint.shape)
    return float(np.sum(joint.mass * d[x2, table[x1, v]]))


def min_achievable_distortion(source: JointPMF, d_x2: Any) -> float:
    """E min_xhat d(X2, xhat): the distortion of V = X2 with the best recon."""
    d = _check_distortion(source, d_x2)
    p2 = source.marginal(1).mass
    return float(p2 @ d.min(axis=1))


def lossless_corner_points(source: JointPMF) -> Dict[str, float]:
    """Bounds of the D = 0, V = X2 region."""
    return {
        "R1p_min": conditional_entropy(source, 0, 1),
        "R2p_min": conditional_entropy(source, 1, 0),
        "sum_min": entropy(source, (0, 1)),
    }


# ============================================================================
# GRID TABLES
# ============================================================================


def compositions(total: int, parts: int) -> np.ndarray:
    """All compositions of ``total`` into ``parts`` nonnegative parts (stars and bars)."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + bars + (total + parts - 1,)
        rows.append([edges[k + 1] - edges[k] - 1 for k in range(parts)])
    return np.asarray(rows, dtype=np.int64)


class _ColumnTables:
    """phi, chi, psi and the best-recon table over all columns c in {0..g}^{|X2|}."""

    def __init__(self, source: JointPMF, d: np.ndarray, grid: int, v_size: int, mode: str):
        self.grid = grid
        k1, k2 = source.shape
        self.k1, self.k2 = k1, k2
        p = source.mass
        p1 = p.sum(axis=1)
        p2 = p.sum(axis=0)

        points = np.indices((grid + 1,) * k2).reshape(k2, -1).T / grid  # (T, k2)
        q = points @ p.T  # q[t, x1] = sum_x2 p(x1, x2) c[x2]
        r = points @ p2
        cond_x1 = np.sum(xlogy(q, q) - xlogy(q, p1[None, :]), axis=1)
        self.phi = (-cond_x1 + (xlogy(points, points) @ p2)) / LN2
        self.chi = (-xlogy(r, r) + cond_x1) / LN2

        # cost[t, x1, xhat] = sum_x2 p(x1, x2) c[x2] d(x2, xhat)
        cost = np.einsum("ab,tb,bh->tah", p, points, d)
        if mode == "pointwise":
            self.recon = np.argmin(cost, axis=2)
            self.psi = np.take_along_axis(cost, self.recon[:, :, None], axis=2)[:, :, 0].sum(axis=1)
        else:
            kh = d.shape[1]
            maps_total = float(kh) ** (k1 * v_size)
            if maps_total > RECON_ENUMERATION_CAP:
                raise CapacityError("RECON_ENUMERATION_CAP", RECON_ENUMERATION_CAP, maps_total)
            maps = np.array(list(itertools.product(range(kh), repeat=k1)), dtype=np.int64)
            # per-column cost of every map x1 -> xhat; lexicographically first minimiser wins
            per_map = cost[:, np.arange(k1)[None, :], maps].sum(axis=2)
            best = np.argmin(per_map, axis=1)
            self.recon = maps[best]
            self.psi = per_map[np.arange(per_map.shape[0]), best]
        self.weights = (grid + 1) ** np.arange(k2 - 1, -1, -1)


class _GridProblem:
    """Grid over p(v|x2): x2 = 0 row from non-increasing compositions, others free."""

    def __init__(self, source: JointPMF, d_x2: Any, params: SolverParams):
        self.source = source
        self.d = _check_distortion(source, d_x2)
        self.params = params
        k2 = source.shape[1]
        self.v_size = params.v_size or k2 + 2
        g = params.grid
        self.comps = compositions(g, self.v_size)
        sorted_rows = np.all(np.diff(self.comps, axis=1) <= 0, axis=1)
        self.parts = self.comps[sorted_rows]
        self.total = int(self.parts.shape[0]) * int(self.comps.shape[0]) ** (k2 - 1)
        if self.total > GRID_CELL_CAP:
            raise CapacityError("GRID_CELL_CAP", GRID_CELL_CAP, float(self.total))
        with log_operation(slog, "build_tables", grid=g, v_size=self.v_size):
            self.tables = _ColumnTables(source, self.d, g, self.v_size, params.recon_search)

    # ---- cell decoding ------------------------------------------------------

    def _rows(self, cells: np.ndarray) -> List[np.ndarray]:
        """Per-x2 rows (each (B, |V|)) of the given flattened cell indices."""
        k2 = self.source.shape[1]
        remaining = cells.copy()
        rows: List[np.ndarray] = [None] * k2  # type: ignore[list-item]
        n_comp = self.comps.shape[0]
        for x2 in range(k2 - 1, 0, -1):
            remaining, idx = np.divmod(remaining, n_comp)
            rows[x2] = self.comps[idx]
        rows[0] = self.parts[remaining]
        return rows

    def _column_index(self, cells: np.ndarray) -> np.ndarray:
        """(B, |V|) table index of every column of every cell."""
        rows = self._rows(cells)
        index = np.zeros_like(rows[0])
        for x2, row in enumerate(rows):
            index += row * self.tables.weights[x2]
        return index

    def aux_of(self, cell: int) -> np.ndarray:
        rows = self._rows(np.array([cell], dtype=np.int64))
        return np.stack([r[0] for r in rows], axis=0) / self.params.grid

    def recon_of(self, cell: int) -> np.ndarray:
        columns = self._column_index(np.array([cell], dtype=np.int64))[0]
        return self.tables.recon[columns].T.copy()  # (|X1|, |V|)

    # ---- scans --------------------------------------------------------------

    def _blocks(self) -> range:
        return range(0, self.total, GRID_BLOCK_CELLS)

    def _map_blocks(self, fn) -> List[Any]:
        starts = self._blocks()
        workers = self.params.workers or DEFAULT_WORKERS
        if len(starts) == 1 or workers == 1:
            return [fn(s) for s in starts]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(fn, starts))

    def _score(self, start: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        cells = np.arange(start, min(start + GRID_BLOCK_CELLS, self.total), dtype=np.int64)
        columns = self._column_index(cells)
        t = self.tables
        return cells, t.phi[columns].sum(axis=1), t.psi[columns].sum(axis=1), columns

    def best_cell(self, budget: float) -> Optional[Tuple[float, int]]:
        """(min I(V;X2|X1), lowest cell index) over cells with distortion <= budget."""
        limit = budget + self.params.tolerance

        def scan(start: int) -> Optional[Tuple[float, int]]:
            cells, value, dist, _ = self._score(start)
            feasible = dist <= limit
            if not np.any(feasible):
                return None
            masked = np.where(feasible, value, np.inf)
            k = int(np.argmin(masked))
            return float(masked[k]), int(cells[k])

        best: Optional[Tuple[float, int]] = None
        for result in self._map_blocks(scan):
            if result is None:
                continue
            if best is None or result[0] < best[0]:
                best = result
        return best

    def min_distortion(self) -> float:
        def scan(start: int) -> float:
            return float(self._score(start)[2].min())

        return min(self._map_blocks(scan))

    def any_cell(self, pt: RatePoint, h_x1: float) -> bool:
        limit = pt.d + self.params.tolerance
        tol = self.params.tolerance

        def scan(start: int) -> bool:
            _, cond_mi, dist, columns = self._score(start)
            i_x1v = self.tables.chi[columns].sum(axis=1)
            ok = (
                (dist <= limit)
                & (pt.r1p >= h_x1 - i_x1v - tol)
                & (pt.r2p >= cond_mi - tol)
                & (pt.r1 + pt.r2p >= h_x1 + cond_mi - tol)
            )
            return bool(np.any(ok))

        return any(self._map_blocks(scan))


# ============================================================================
# SOLVER
# ============================================================================


def evaluate_channel(
    source: JointPMF,
    aux: CondPMF,
    recon: Any,
    d_x2: Any,
    D: Optional[float] = None,
    alpha: Optional[float] = None,
) -> RegionSolution:
    """RegionSolution for a fixed test channel and reconstruction (no search).

    ``D`` defaults to the achieved distortion.
    """
    table = np.asarray(recon, dtype=np.int64)
    achieved = expected_distortion(source, aux, table, d_x2)
    joint = compose_markov(source, aux)
    solution = RegionSolution(
        aux=aux,
        joint=joint,
        recon=table,
        sum_rate=sum_rate(source, aux),
        achieved_d=achieved,
        d_constraint=achieved if D is None else float(D),
        info=information_summary(joint),
        grid=0,
        cells_scanned=0,
        n_recon=int(np.asarray(d_x2).shape[1]),
    )
    solution.corner_points = corner_points(source, solution, alpha)
    return solution


def _solution_from_cell(
    problem: _GridProblem, cell: int, budget: float, alpha: Optional[float] = None
) -> RegionSolution:
    v_alphabet = Alphabet.of_size(problem.v_size, prefix="v")
    aux = CondPMF((problem.source.axes[1],), (v_alphabet,), problem.aux_of(cell))
    solution = evaluate_channel(
        problem.source, aux, problem.recon_of(cell), problem.d, budget, alpha
    )
    solution.grid = problem.params.grid
    solution.cells_scanned = problem.total
    return solution


def _solve(problem: _GridProblem, budget: float, alpha: Optional[float]) -> RegionSolution:
    if budget < 0:
        raise ConfigurationError(f"must be >= 0, got {budget}", "D")
    floor = min_achievable_distortion(problem.source, problem.d)
    if budget < floor - problem.params.tolerance:
        raise InfeasibleError(
            f"D={budget:g} is below the minimum achievable distortion {floor:g}",
            min_distortion=floor,
        )
    with log_operation(
        slog, "minimize_sum_rate", D=budget, grid=problem.params.grid, cells=problem.total
    ) as op:
        best = problem.best_cell(budget)
        if best is None:
            grid_floor = problem.min_distortion()
            raise InfeasibleError(
                f"no grid channel with |V|={problem.v_size} meets D={budget:g}; "
                f"grid minimum is {grid_floor:g}",
                min_distortion=grid_floor,
            )
        solution = _solution_from_cell(problem, best[1], budget, alpha)
        op["sum_rate"] = solution.sum_rate
    return solution


def minimize_sum_rate(
    source: JointPMF,
    d_x2: Any,
    D: float,
    params: Optional[SolverParams] = None,
    alpha: Optional[float] = None,
) -> RegionSolution:
    """Minimum of H(X1) + I(V;X2|X1) over grid channels meeting E d <= D."""
    if source.arity != 2:
        raise ArgumentError("source must be a two-axis joint over (X1, X2)")
    problem = _GridProblem(source, d_x2, params or SolverParams())
    log_performance_metrics(slog, {"operation": "grid", "cells": problem.total})
    return _solve(problem, float(D), alpha)


def sweep_sum_rate(
    source: JointPMF,
    d_x2: Any,
    d_values: Sequence[float],
    params: Optional[SolverParams] = None,
    alpha: Optional[float] = None,
    collector: Optional[ErrorCollector] = None,
) -> List[RegionSolution]:
    """Solve a list of distortion budgets sharing one set of grid tables.

    With a ``collector``, a failing budget is recorded there and skipped;
    without one the first failure propagates.
    """
    problem = _GridProblem(source, d_x2, params or SolverParams())
    if collector is None:
        return [_solve(problem, float(budget), alpha) for budget in d_values]
    solutions: List[RegionSolution] = []
    for budget in d_values:
        with collector.capture("minimize_sum_rate", D=float(budget)):
            solutions.append(_solve(problem, float(budget), alpha))
    return solutions


def corner_points(
    source: JointPMF, solution: RegionSolution, alpha: Optional[float] = None
) -> Dict[str, RatePoint]:
    """Points A, B, C, D for the solution's test channel.

    A: R1 = R1' = H(X1),          R2 = R2' = I(V;X2) - I(X1;V)
    B: R1 = R1' = H(X1) - a,      R2 = R2' = I(V;X2) - I(X1;V) + a
    C: R1 = R1' = H(X1|V),        R2 = R2' = I(V;X2)
    D: R1 = H(X1), R2 = I(V;X2),  R1' = H(X1|V), R2' = I(V;X2) - I(X1;V)
    """
    info = solution.info
    h_x1 = info["H_X1"]
    i_vx2 = info["I_VX2"]
    i_x1v = info["I_X1V"]
    cond = i_vx2 - i_x1v
    h_x1_v = h_x1 - i_x1v
    a = i_x1v / 2 if alpha is None else float(alpha)
    if alpha is not None and not (0 <= a <= i_x1v + SUM_RATE_EQUALITY_TOLERANCE):
        raise ConfigurationError(f"must lie in [0, I(X1;V)={i_x1v:g}], got {a:g}", "alpha")
    d = solution.achieved_d
    return {
        "A": RatePoint(h_x1, cond, h_x1, cond, d),
        "B": RatePoint(h_x1 - a, cond + a, h_x1 - a, cond + a, d),
        "C": RatePoint(h_x1_v, i_vx2, h_x1_v, i_vx2, d),
        "D": RatePoint(h_x1, i_vx2, h_x1_v, cond, d),
    }


def in_region(
    source: JointPMF,
    d_x2: Any,
    pt: RatePoint,
    params: Optional[SolverParams] = None,
) -> bool:
    """True iff some grid channel with E d <= pt.d satisfies every rate constraint.

    R_i >= R_i' >= 0 and the sum equality are checked first; they do not
    depend on the channel.
    """
    tol = (params or SolverParams()).tolerance
    if not pt.sums_match():
        return False
    if min(pt.r1p, pt.r2p) < -tol or pt.r1 < pt.r1p - tol or pt.r2 < pt.r2p - tol:
        return False
    if pt.d < min_achievable_distortion(source, d_x2) - tol:
        return False
    problem = _GridProblem(source, d_x2, params or SolverParams())
    with log_operation(slog, "in_region", cells=problem.total):
        return problem.any_cell(pt, entropy(source, 0))


def sum_rate_bounds(source: JointPMF) -> Tuple[float, float]:
    """(H(X1), H(X1, X2)): the sum rate at large D and at D = 0 under Hamming."""
    return entropy(source, 0), entropy(source, (0, 1))


def distortion_grid(d_max: float, points: int) -> List[float]:
    """Evenly spaced budgets 0 .. d_max."""
    if points < 2:
        raise ArgumentError("a sweep needs at least two points")
    return [d_max * k / (points - 1) for k in range(points)]


def region_row(solution: RegionSolution) -> List[Any]:
    """CSV row: D, sum rate, the four corner points and the flattened channel."""
    row: List[Any] = [solution.d_constraint, solution.sum_rate, solution.achieved_d]
    for name in ("A", "B", "C", "D"):
        row.extend(solution.corner_points[name].rates())
    row.extend(solution.aux.mass.ravel().tolist())
    return row


def region_header(solution: RegionSolution) -> List[str]:
    header = ["D", "sum_rate", "achieved_d"]
    for name in ("A", "B", "C", "D"):
        header.extend(f"{name}_{r}" for r in ("R1", "R2", "R1p", "R2p"))
    x2_labels = solution.aux.from_axes[0].labels
    v_labels = solution.aux.to_axes[0].labels
    header.extend(f"p_{v}_given_{x}" for x in x2_labels for v in v_labels)
    return header
