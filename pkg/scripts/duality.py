#!/usr/bin/env python3
"""
Duality between the lossless/lossy source-coding problem and the
semi-deterministic broadcast channel (SBC), both with correlated messages.

Forward:  a solved source problem p(x1, x2) p*(v|x2) 1[xhat2 = g(x1, v)]
          becomes an SBC with input x = (x1, xhat2), channel p*(x2|x),
          x1 = f(x) and cost w(x) = c1 D(p*(x1, x2|x) || p(x1, x2)) + theta.
Backward: a solved SBC p*(v) p*(x|v) pbar(x2|x) becomes a source
          p*(x1, x2) with distortion d = -c2 log pbar(x2|x) + d0(x1, x2).

Both sides report the sum rate H(X1) + I(V;X2) - I(X1;V); the report
compares them, lists the Markov conditions the constructions rely on and
carries the graph-parameter tuple of the shared rate point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
from scipy.special import entr

from bigraph import SemiRegularParams, graph_parameters
from config import (
    DEFAULT_C1,
    DEFAULT_C2,
    DEFAULT_GRID,
    DEFAULT_THETA,
    DUALITY_BLOCK_LENGTH,
    DUALITY_EPS_PRIME,
    DUALITY_GAP_TOLERANCE,
    MARKOV_EXACT_TOLERANCE,
    MARKOV_GRID_TOLERANCE,
    SBC_CANDIDATE_CAP,
    SBC_MASS_FLOOR,
    SUM_RATE_EQUALITY_TOLERANCE,
    setup_logging,
)
from errors import (
    ArgumentError,
    CapacityError,
    ConfigurationError,
    InfeasibleError,
    PreconditionError,
)
from logging_utils import StructuredLogger, log_operation
from probcore import (
    LN2,
    Alphabet,
    CondPMF,
    JointPMF,
    conditional_entropy,
    entropy,
    markov_violation,
    mutual_information,
    relative_entropy,
)
from region import RegionSolution, SolverParams, compositions, minimize_sum_rate, sum_rate

logger = setup_logging("duality")
slog = StructuredLogger("duality")


# ============================================================================
# TYPES
# ============================================================================


@dataclass(frozen=True, eq=False)
class SbcChannel:
    """Channel pbar(x2|x) with deterministic outputs x1 = f(x) and xhat2 = h(x).

    ``det_map`` and ``xhat_map`` hold f and h as index arrays over the input
    alphabet; together they must identify x.
    """

    input_alphabet: Alphabet
    x1_alphabet: Alphabet
    xhat_alphabet: Alphabet
    channel: CondPMF
    det_map: np.ndarray
    xhat_map: np.ndarray

    def __post_init__(self) -> None:
        k = self.input_alphabet.size
        det = np.asarray(self.det_map, dtype=np.int64)
        xhat = np.asarray(self.xhat_map, dtype=np.int64)
        if det.shape != (k,) or xhat.shape != (k,):
            raise ArgumentError(f"input maps must have shape ({k},)")
        if det.min() < 0 or det.max() >= self.x1_alphabet.size:
            raise ArgumentError("det_map points outside the X1 alphabet")
        if xhat.min() < 0 or xhat.max() >= self.xhat_alphabet.size:
            raise ArgumentError("xhat_map points outside the reconstruction alphabet")
        if len(set(zip(det.tolist(), xhat.tolist()))) != k:
            raise ArgumentError("(f(x), h(x)) must identify the input symbol")
        if self.channel.from_shape != (k,) or len(self.channel.to_axes) != 1:
            raise ArgumentError("channel must map the input alphabet to one output axis")
        det.setflags(write=False)
        xhat.setflags(write=False)
        object.__setattr__(self, "det_map", det)
        object.__setattr__(self, "xhat_map", xhat)

    @property
    def x2_size(self) -> int:
        return self.channel.to_shape[0]

    @classmethod
    def noiseless(cls, size: int) -> "SbcChannel":
        """x1 = x2 = x on an alphabet of ``size`` symbols."""
        alphabet = Alphabet.of_size(size)
        return cls(
            alphabet,
            alphabet,
            alphabet,
            CondPMF((alphabet,), (alphabet,), np.eye(size)),
            np.arange(size),
            np.arange(size),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input_alphabet": list(self.input_alphabet.labels),
            "channel": self.channel.to_dict(),
            "det_map": self.det_map.tolist(),
            "xhat_map": self.xhat_map.tolist(),
        }


@dataclass(frozen=True)
class CostSpec:
    """Input cost w(x) (``math.inf`` marks forbidden inputs) and budget W."""

    w: Tuple[float, ...]
    W: float
    c1: float = DEFAULT_C1
    theta: float = DEFAULT_THETA

    def __post_init__(self) -> None:
        if not self.c1 > 0:
            raise ConfigurationError(f"must be > 0, got {self.c1}", "c1")
        values = tuple(float(x) for x in self.w)
        if any(math.isnan(x) for x in values):
            raise ArgumentError("cost values must not be NaN")
        object.__setattr__(self, "w", values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.w, dtype=float)

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.array)

    def to_dict(self) -> Dict[str, Any]:
        return {"w": list(self.w), "W": self.W, "c1": self.c1, "theta": self.theta}


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """d(x1, x2, xhat2) (``math.inf`` off the channel support) and budget D."""

    d: np.ndarray
    D: float
    c2: float = DEFAULT_C2
    d0: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if not self.c2 > 0:
            raise ConfigurationError(f"must be > 0, got {self.c2}", "c2")
        if np.any(np.asarray(self.d) < 0):
            raise ArgumentError("distortion must be nonnegative; raise d0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "D": self.D,
            "c2": self.c2,
            "d0": None if self.d0 is None else self.d0,
        }


@dataclass
class SbcSolution:
    """p(v), p(x|v) and the sum rate they achieve on a channel."""

    p_v: np.ndarray
    p_x_given_v: np.ndarray  # (|V|, |X|)
    value: float
    value_alt: float  # H(X1|V) + I(V;X2)
    joint: JointPMF  # p(v, x, x2)
    info: Dict[str, float] = field(default_factory=dict)
    candidates: int = 0
    grid: int = 0

    @property
    def form_gap(self) -> float:
        return abs(self.value - self.value_alt)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "value_alt": self.value_alt,
            "p_v": self.p_v,
            "p_x_given_v": self.p_x_given_v,
            "info": dict(self.info),
            "candidates": self.candidates,
            "grid": self.grid,
        }


@dataclass
class ReverseCheck:
    """Backward construction applied to the solved SBC.

    ``violation`` is the X1 -> X2 -> V deviation of the SBC optimum; the
    dual source, its distortion and sum rate exist only when it is within
    ``tolerance``.
    """

    violation: float
    tolerance: float
    source: Optional[JointPMF] = None
    distortion: Optional[DistortionSpec] = None
    sum_rate: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.sum_rate is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check": "X1->X2->V",
            "violation": self.violation,
            "tolerance": self.tolerance,
            "ok": self.ok,
            "source": None if self.source is None else self.source.mass,
            "distortion": None if self.distortion is None else self.distortion.to_dict(),
            "sum_rate": self.sum_rate,
        }


@dataclass
class DualityReport:
    """Outcome of one forward/backward duality run."""

    byp_sum_rate: float
    sbc_sum_rate: float
    markov_checks: List[Tuple[str, float]]
    byp_graph: SemiRegularParams
    sbc_graph: SemiRegularParams
    sbc_region: Dict[str, bool]
    handoff_sum_rate: float
    roundtrip_source_error: float
    reverse: Optional[ReverseCheck] = None
    block_length: int = DUALITY_BLOCK_LENGTH
    tolerance: float = DUALITY_GAP_TOLERANCE
    markov_tolerance: float = MARKOV_GRID_TOLERANCE
    cost: Optional[CostSpec] = None
    distortion: Optional[DistortionSpec] = None
    sbc: Optional[SbcSolution] = None

    @property
    def gap(self) -> float:
        return abs(self.byp_sum_rate - self.sbc_sum_rate)

    @property
    def gap_ok(self) -> bool:
        return self.gap < self.tolerance

    @property
    def correlation_match(self) -> bool:
        return _same_params(self.byp_graph, self.sbc_graph, self.block_length, self.tolerance)

    def failed_checks(self) -> List[str]:
        return [name for name, v in self.markov_checks if v > self.markov_tolerance]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "byp_sum_rate": self.byp_sum_rate,
            "sbc_sum_rate": self.sbc_sum_rate,
            "gap": self.gap,
            "gap_ok": self.gap_ok,
            "tolerance": self.tolerance,
            "markov_checks": [
                {"name": name, "violation": v, "ok": v <= self.markov_tolerance}
                for name, v in self.markov_checks
            ],
            "correlation_match": self.correlation_match,
            "graph_parameters": {
                "byp": self.byp_graph.to_dict(),
                "sbc": self.sbc_graph.to_dict(),
            },
            "sbc_region_check": dict(self.sbc_region),
            "handoff_sum_rate": self.handoff_sum_rate,
            "roundtrip_source_error": self.roundtrip_source_error,
            "reverse": None if self.reverse is None else self.reverse.to_dict(),
            "cost": None if self.cost is None else self.cost.to_dict(),
            "distortion": None if self.distortion is None else self.distortion.to_dict(),
            "sbc": None if self.sbc is None else self.sbc.to_dict(),
        }


def _same_params(a: SemiRegularParams, b: SemiRegularParams, n: int, tol: float) -> bool:
    """Exponents (1/n) log2 of every parameter agree within ``tol``.

    The integer bin counts delta1 and delta2 may also sit one ceiling step apart.
    """
    steps = (1.0, 1.0, 0.0, 0.0, 0.0)
    return all(
        abs(math.log2(float(x)) - math.log2(float(y))) <= n * tol + step + 1e-9
        for x, y, step in zip(a.as_tuple(), b.as_tuple(), steps)
    )


# ============================================================================
# FORWARD: SOURCE PROBLEM -> SBC
# ============================================================================


def extended_joint(solution: RegionSolution) -> JointPMF:
    """p*(x1, x2, v, xhat2) with the deterministic reconstruction folded in."""
    joint = solution.joint
    n_recon = solution.n_recon
    k1, k2, kv = joint.shape
    mass = np.zeros((k1, k2, kv, n_recon))
    x1, x2, v = np.indices(joint.shape)
    np.add.at(mass, (x1, x2, v, solution.recon[x1, v]), joint.mass)
    recon_axis = Alphabet.of_size(n_recon, prefix="r")
    return JointPMF(tuple(joint.axes) + (recon_axis,), mass)


def byp_to_sbc(
    source: JointPMF,
    solution: RegionSolution,
    c1: float = DEFAULT_C1,
    theta: float = DEFAULT_THETA,
    tolerance: float = MARKOV_EXACT_TOLERANCE,
) -> Tuple[SbcChannel, CostSpec]:
    """Dual channel p*(x2|x1, xhat2) and cost of a solved source problem.

    Raises PreconditionError when V -> (X1, Xhat2) -> X2 fails beyond
    ``tolerance``.
    """
    p4 = extended_joint(solution)
    violation = markov_violation(p4, 2, (0, 3), 1)
    if violation > tolerance:
        raise PreconditionError("V->X->(X1,X2)", violation, tolerance)

    k1, k2 = source.shape
    n_recon = solution.n_recon
    input_labels = tuple(
        f"{a}|{b}" for a in source.axes[0].labels for b in p4.axes[3].labels
    )
    inputs = Alphabet(input_labels)
    channel = CondPMF.from_joint(p4, (0, 3), 1)
    channel = CondPMF((inputs,), (source.axes[1],), channel.mass.reshape(-1, k2))
    det_map = np.repeat(np.arange(k1), n_recon)
    xhat_map = np.tile(np.arange(n_recon), k1)
    ch = SbcChannel(inputs, source.axes[0], p4.axes[3], channel, det_map, xhat_map)

    p_x = p4.marginal((0, 3)).mass.ravel()
    w = np.full(inputs.size, math.inf)
    for x in np.flatnonzero(p_x > 0):
        conditional = np.zeros((k1, k2))
        conditional[det_map[x]] = channel.mass[x]
        w[x] = c1 * relative_entropy(conditional, source.mass) + theta
    reachable = p_x > 0
    budget = float(np.sum(p_x[reachable] * w[reachable]))
    logger.info(
        "Forward construction: %d inputs (%d reachable), W=%.6f",
        inputs.size,
        int(reachable.sum()),
        budget,
    )
    return ch, CostSpec(tuple(w.tolist()), budget, c1, theta)


def perturb_channel(
    ch: SbcChannel, row: int, amount: float, column: Optional[int] = None
) -> SbcChannel:
    """Add ``amount`` to one entry of a channel row and renormalise that row.

    ``column`` defaults to the row's smallest entry.
    """
    if not 0 <= row < ch.input_alphabet.size:
        raise ArgumentError(f"row {row} out of range")
    if amount <= 0:
        raise ArgumentError("perturbation amount must be positive")
    mass = np.array(ch.channel.mass, dtype=float)
    target = int(np.argmin(mass[row])) if column is None else int(column)
    mass[row, target] += amount
    mass[row] /= mass[row].sum()
    channel = CondPMF(ch.channel.from_axes, ch.channel.to_axes, mass)
    return SbcChannel(
        ch.input_alphabet, ch.x1_alphabet, ch.xhat_alphabet, channel, ch.det_map, ch.xhat_map
    )


# ============================================================================
# SBC SUM CAPACITY
# ============================================================================


def _column_scores(ch: SbcChannel, px: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per candidate p(x|v): H(X1|v) - H(X2|v) and the output law p(x2|v)."""
    out = px @ ch.channel.mass  # (S, |X2|)
    onehot = np.eye(ch.x1_alphabet.size)[ch.det_map]  # (|X|, |X1|)
    x1_law = px @ onehot
    h1 = entr(x1_law).sum(axis=1) / LN2
    h2 = entr(out).sum(axis=1) / LN2
    return h1 - h2, out


def sbc_joint(ch: SbcChannel, p_v: np.ndarray, p_x_given_v: np.ndarray) -> JointPMF:
    """p(v, x, x2) = p(v) p(x|v) pbar(x2|x)."""
    mass = np.einsum("v,vx,xy->vxy", p_v, p_x_given_v, ch.channel.mass)
    v_axis = Alphabet.of_size(len(p_v), prefix="v")
    return JointPMF((v_axis, ch.input_alphabet, ch.channel.to_axes[0]), mass)


def _vx1x2(ch: SbcChannel, joint: JointPMF) -> JointPMF:
    """p(v, x1, x2) with X1 = f(X) folded in."""
    onehot = np.eye(ch.x1_alphabet.size)[ch.det_map]
    mass = np.einsum("vxy,xa->vay", joint.mass, onehot)
    return JointPMF((joint.axes[0], ch.x1_alphabet, joint.axes[2]), mass)


def _sbc_information(ch: SbcChannel, joint: JointPMF) -> Dict[str, float]:
    """Entropies of (V, X1, X2) with X1 = f(X)."""
    vx1x2 = _vx1x2(ch, joint)
    return {
        "H_X1": entropy(vx1x2, 1),
        "I_VX2": mutual_information(vx1x2, 0, 2),
        "I_X1V": mutual_information(vx1x2, 1, 0),
        "H_X1_given_V": conditional_entropy(vx1x2, 1, 0),
    }


def evaluate_sbc(ch: SbcChannel, p_v: Any, p_x_given_v: Any) -> SbcSolution:
    """Sum rate of fixed SBC distributions (both algebraic forms)."""
    pv = np.asarray(p_v, dtype=float)
    pxv = np.asarray(p_x_given_v, dtype=float)
    joint = sbc_joint(ch, pv, pxv)
    info = _sbc_information(ch, joint)
    value = info["H_X1"] + info["I_VX2"] - info["I_X1V"]
    value_alt = info["H_X1_given_V"] + info["I_VX2"]
    if abs(value - value_alt) > SUM_RATE_EQUALITY_TOLERANCE:
        logger.warning("SBC sum-rate forms differ: %.12f vs %.12f", value, value_alt)
    return SbcSolution(pv, pxv, value, value_alt, joint, info)


def sbc_sum_capacity(
    ch: SbcChannel, cost: CostSpec, params: Optional[SolverParams] = None
) -> SbcSolution:
    """max over p(v), p(x|v) of H(X1) + I(V;X2) - I(X1;V) with E w <= W.

    p(x|v) ranges over the simplex grid on the finite-cost inputs; the mixture
    weights p(v) solve a concave program (cvxpy). Inputs with infinite cost
    receive zero mass.
    """
    params = params or SolverParams()
    w = cost.array
    if w.shape != (ch.input_alphabet.size,):
        raise ArgumentError("cost vector does not match the input alphabet")
    allowed = np.flatnonzero(np.isfinite(w))
    if allowed.size == 0:
        raise InfeasibleError("every input has infinite cost", min_cost=math.inf)
    min_cost = float(w[allowed].min())
    if min_cost > cost.W + SUM_RATE_EQUALITY_TOLERANCE:
        raise InfeasibleError(
            f"cost budget W={cost.W:g} is below the cheapest input cost {min_cost:g}",
            min_cost=min_cost,
        )

    grid = params.grid
    n_candidates = math.comb(grid + int(allowed.size) - 1, int(allowed.size) - 1)
    if n_candidates > SBC_CANDIDATE_CAP:
        raise CapacityError("SBC_CANDIDATE_CAP", SBC_CANDIDATE_CAP, float(n_candidates))
    with log_operation(
        slog, "sbc_sum_capacity", grid=grid, inputs=int(allowed.size)
    ) as op:
        comps = compositions(grid, int(allowed.size)) / grid
        px = np.zeros((comps.shape[0], ch.input_alphabet.size))
        px[:, allowed] = comps
        # A column may cost more than W; only the mixture must meet the budget
        column_cost = px[:, allowed] @ w[allowed]
        a, out = _column_scores(ch, px)
        op["candidates"] = int(px.shape[0])

        mu = cp.Variable(px.shape[0], nonneg=True)
        x2_law = out.T @ mu
        objective = cp.Maximize(cp.sum(cp.entr(x2_law)) / LN2 + a @ mu)
        constraints = [cp.sum(mu) == 1]
        if math.isfinite(cost.W):
            constraints.append(column_cost @ mu <= cost.W)
        problem = cp.Problem(objective, constraints)
        problem.solve()
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or mu.value is None:
            raise InfeasibleError(
                f"SBC program ended with status {problem.status}", min_cost=min_cost
            )
        if problem.status == cp.OPTIMAL_INACCURATE:
            logger.warning("SBC program solved inaccurately")

        weights = np.clip(np.asarray(mu.value, dtype=float), 0.0, None)
        support = np.flatnonzero(weights > SBC_MASS_FLOOR)
        if support.size == 0:
            support = np.array([int(np.argmax(weights))])
        p_v = weights[support] / weights[support].sum()
        solution = evaluate_sbc(ch, p_v, px[support])
        solution.candidates = int(px.shape[0])
        solution.grid = grid
        op["value"] = solution.value
        op["support"] = int(support.size)
    return solution


def sbc_region_check(solution: SbcSolution, rates: Sequence[float]) -> Dict[str, bool]:
    """R1 <= H(X1), R2 <= I(V;X2), R1 + R2' <= H(X1|V) + I(V;X2) on the SBC joint."""
    r1, r2, r1p, r2p = (float(r) for r in rates)
    info = solution.info
    tol = SUM_RATE_EQUALITY_TOLERANCE
    return {
        "R1_le_H_X1": r1 <= info["H_X1"] + tol,
        "R2_le_I_VX2": r2 <= info["I_VX2"] + tol,
        "sum_le_bound": r1 + r2p <= info["H_X1_given_V"] + info["I_VX2"] + tol,
        "sums_match": abs((r1 + r2p) - (r1p + r2)) <= tol,
        "primed_ordered": r1 >= r1p - tol and r2 >= r2p - tol and min(r1p, r2p) >= -tol,
    }


def sbc_rates(solution: SbcSolution) -> Tuple[float, float, float, float]:
    """Point D of the SBC joint: (H(X1), I(V;X2), H(X1|V), I(V;X2) - I(X1;V))."""
    info = solution.info
    return (
        info["H_X1"],
        info["I_VX2"],
        info["H_X1_given_V"],
        info["I_VX2"] - info["I_X1V"],
    )


# ============================================================================
# BACKWARD: SBC -> SOURCE PROBLEM
# ============================================================================


def handoff_solution(solution: RegionSolution, ch: SbcChannel) -> SbcSolution:
    """The source problem's own p*(v), p*(x|v) evaluated on its dual channel."""
    p4 = extended_joint(solution)
    vx = p4.marginal((2, 0, 3)).mass.reshape(p4.shape[2], -1)
    p_v = vx.sum(axis=1)
    used = p_v > 0
    p_x_given_v = vx[used] / p_v[used, None]
    return evaluate_sbc(ch, p_v[used], p_x_given_v)


def sbc_to_byp(
    ch: SbcChannel,
    sbc_solution: SbcSolution,
    c2: float = DEFAULT_C2,
    d0: Optional[Any] = None,
    tolerance: float = MARKOV_EXACT_TOLERANCE,
) -> Tuple[JointPMF, DistortionSpec]:
    """Dual source p*(x1, x2) and distortion of a solved SBC.

    Raises PreconditionError when X1 -> X2 -> V fails beyond ``tolerance``.
    """
    k1 = ch.x1_alphabet.size
    kh = ch.xhat_alphabet.size
    k2 = ch.x2_size
    joint = sbc_joint(ch, sbc_solution.p_v, sbc_solution.p_x_given_v)  # (v, x, x2)
    kv = joint.shape[0]

    p4 = np.zeros((k1, k2, kv, kh))
    for x in range(ch.input_alphabet.size):
        p4[ch.det_map[x], :, :, ch.xhat_map[x]] += joint.mass[:, x, :].T
    v_axis = joint.axes[0]
    x2_axis = ch.channel.to_axes[0]
    full = JointPMF((ch.x1_alphabet, x2_axis, v_axis, ch.xhat_alphabet), p4)
    violation = markov_violation(full, 0, 1, 2)
    if violation > tolerance:
        raise PreconditionError("X1->X2->V", violation, tolerance)

    offset = np.zeros((k1, k2)) if d0 is None else np.asarray(d0, dtype=float)
    if offset.shape != (k1, k2):
        raise ConfigurationError(f"must have shape {(k1, k2)}", "d0")
    d = np.full((k1, k2, kh), math.inf)
    for x in range(ch.input_alphabet.size):
        row = ch.channel.mass[x]
        a, b = ch.det_map[x], ch.xhat_map[x]
        with np.errstate(divide="ignore"):
            d[a, :, b] = np.where(row > 0, -c2 * np.log2(row), math.inf) + offset[a]
    if np.any(d < 0):
        raise ConfigurationError("offset makes some distortion negative", "d0")

    p_x1x2xh = p4.sum(axis=2)
    support = p_x1x2xh > 0
    budget = float(np.sum(p_x1x2xh[support] * d[support]))
    source = full.marginal((0, 1))
    return source, DistortionSpec(d, budget, c2, None if d0 is None else offset)



def reverse_from_sbc(
    ch: SbcChannel,
    sbc_solution: SbcSolution,
    c2: float = DEFAULT_C2,
    tolerance: float = MARKOV_GRID_TOLERANCE,
) -> ReverseCheck:
    """Dual source problem of a solved SBC and the sum rate its test channel achieves.

    The test channel is p*(v|x2) of the SBC joint; on the dual source its sum
    rate H(X1) + I(V;X2) - I(X1;V) should reproduce the SBC value. A violated
    X1 -> X2 -> V is reported, not raised.
    """
    violation = markov_violation(_vx1x2(ch, sbc_solution.joint), 1, 2, 0)
    if violation > tolerance:
        logger.warning(
            "Backward construction skipped: X1->X2->V violated by %.3e > %.1e",
            violation,
            tolerance,
        )
        return ReverseCheck(violation, tolerance)
    source, distortion = sbc_to_byp(ch, sbc_solution, c2, tolerance=tolerance)
    aux = CondPMF.from_joint(sbc_solution.joint, 2, 0)
    rate = sum_rate(source, aux)
    logger.info(
        "Backward construction: dual sum rate %.6f at D=%.6f (SBC value %.6f)",
        rate,
        distortion.D,
        sbc_solution.value,
    )
    return ReverseCheck(violation, tolerance, source, distortion, rate)


# ============================================================================
# REPORT
# ============================================================================


def verify_duality(
    byp: RegionSolution,
    sbc: SbcSolution,
    handoff: SbcSolution,
    *,
    n: int = DUALITY_BLOCK_LENGTH,
    eps_prime: float = DUALITY_EPS_PRIME,
    gap_tolerance: float = DUALITY_GAP_TOLERANCE,
    markov_tolerance: float = MARKOV_GRID_TOLERANCE,
    roundtrip_source_error: float = 0.0,
    reverse: Optional[ReverseCheck] = None,
) -> DualityReport:
    """Compare both sides; every check is reported, none raises.

    The SBC graph tuple comes from the SBC optimum's own point D. The region
    check places the source problem's rates on the handed-off distributions.
    """
    p4 = extended_joint(byp)
    checks = [
        ("X1->X2->V", markov_violation(p4, 0, 1, 2)),
        ("X2->V->(X1,Xhat2)", markov_violation(p4, 1, 2, (0, 3))),
        ("V->X->(X1,X2)", markov_violation(p4, 2, (0, 3), 1)),
        ("X2->V->X", markov_violation(sbc.joint, 2, 0, 1)),
    ]
    byp_point = byp.corner_points["D"]
    byp_graph = graph_parameters(n, byp_point.rates(), eps_prime)
    sbc_graph = graph_parameters(n, sbc_rates(sbc), eps_prime)
    report = DualityReport(
        byp_sum_rate=byp.sum_rate,
        sbc_sum_rate=sbc.value,
        markov_checks=checks,
        byp_graph=byp_graph,
        sbc_graph=sbc_graph,
        sbc_region=sbc_region_check(handoff, byp_point.rates()),
        handoff_sum_rate=handoff.value,
        roundtrip_source_error=roundtrip_source_error,
        reverse=reverse,
        block_length=n,
        tolerance=gap_tolerance,
        markov_tolerance=markov_tolerance,
        sbc=sbc,
    )
    if not report.gap_ok:
        logger.warning(
            "Duality gap %.6f exceeds tolerance %.3f", report.gap, gap_tolerance
        )
    for name in report.failed_checks():
        logger.warning("Markov condition %s violated beyond %.1e", name, markov_tolerance)
    if not report.correlation_match:
        logger.warning("Graph parameters of the two problems differ at n=%d", n)
    return report


def run_duality(
    source: JointPMF,
    d_x2: Any,
    D: float,
    params: Optional[SolverParams] = None,
    *,
    c1: float = DEFAULT_C1,
    theta: float = DEFAULT_THETA,
    c2: float = DEFAULT_C2,
    precondition_tolerance: float = MARKOV_EXACT_TOLERANCE,
    n: int = DUALITY_BLOCK_LENGTH,
    eps_prime: float = DUALITY_EPS_PRIME,
    perturb: Optional[Tuple[int, float]] = None,
    solution: Optional[RegionSolution] = None,
) -> DualityReport:
    """Solve the source problem, build and solve its dual SBC, map it back, report.

    ``perturb`` = (row, amount) solves the SBC on a perturbed channel while
    keeping the forward cost (negative control). A precomputed ``solution``
    skips the grid search.
    """
    params = params or SolverParams(grid=DEFAULT_GRID)
    with log_operation(slog, "run_duality", D=D, grid=params.grid) as op:
        byp = solution or minimize_sum_rate(source, d_x2, D, params)
        ch, cost = byp_to_sbc(source, byp, c1, theta, precondition_tolerance)
        handoff = handoff_solution(byp, ch)
        solved_on = perturb_channel(ch, *perturb) if perturb else ch
        sbc = sbc_sum_capacity(solved_on, cost, params)

        recovered, distortion = sbc_to_byp(ch, handoff, c2, tolerance=MARKOV_GRID_TOLERANCE)
        error = float(np.max(np.abs(recovered.mass - source.mass)))
        reverse = reverse_from_sbc(solved_on, sbc, c2)

        report = verify_duality(
            byp,
            sbc,
            handoff,
            n=n,
            eps_prime=eps_prime,
            roundtrip_source_error=error,
            reverse=reverse,
        )
        report.cost = cost
        report.distortion = distortion
        op["gap"] = report.gap
        op["reverse_ok"] = reverse.ok
    return report
