#!/usr/bin/env python3
"""
Random-binning codec over induced bipartite graphs.

Pipeline for one codebook realisation:
    1. draw codebook C1 (typical X1 sequences) and C2 (typical V sequences)
    2. split each codebook into bins B(i), C(j) after a seeded shuffle
    3. induce the message graph: (i, j) is an edge iff B(i) x C(j) holds a
       jointly typical (x1, v) pair
    4. check the degree events E1 / E2 against 2^{nR'} +- eps'
    5. per trial: draw (x1, x2), encode both, decode, account distortion

Every random choice comes from its own SeedSequence stream derived from the
master seed, so codebooks, graphs and trials replay bit-for-bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from bigraph import (
    BipartiteGraph,
    SemiRegularParams,
    bin_count,
    check_nearly_semi_regular,
    graph_parameters,
)
from config import (
    CODEBOOK_CAP,
    DEFAULT_MARKOV_K,
    EXACT_ENUMERATION_THRESHOLD,
    GRAPH_EDGE_CAP,
    GRAPH_MODES,
    PAIR_SCAN_CAP,
    REJECTION_MAX_ROUNDS,
    SEED_STREAMS,
    SUM_RATE_EQUALITY_TOLERANCE,
    setup_logging,
)
from errors import CapacityError, ConfigurationError, DecodeError
from logging_utils import StructuredLogger, log_operation, log_performance_metrics
from probcore import CondPMF, JointPMF, compose_markov, entropy, mutual_information
from typicality import (
    SymbolSequence,
    TypicalityParams,
    check_code_capacity,
    codes_to_symbols,
    pairwise_typical,
    sample_iid,
    symbols_to_codes,
    typical_codes,
    typical_mask,
)

logger = setup_logging("codec")
slog = StructuredLogger("codec")

EVENT_NAMES = ("e1", "e2", "e3", "e4", "e5", "e6", "e7")

CSV_COLUMNS = (
    "n",
    "trials",
    "e1",
    "e2",
    "e3",
    "e4",
    "e5",
    "e6",
    "e7",
    "decode_error_rate",
    "tau_x1",
    "tau_x2",
    "graph_edges",
    "min_degree1",
    "max_degree1",
    "min_degree2",
    "max_degree2",
    "expected_distortion",
    "eps_star",
    "distortion_bound",
)


# ============================================================================
# CONFIGURATION
# ============================================================================


@dataclass(frozen=True)
class CodecConfig:
    """Block length, tolerances, rates (R1, R2, R1', R2') and master seed."""

    n: int
    eps: float
    eps_prime: float
    rates: Tuple[float, float, float, float]
    markov_k: float = DEFAULT_MARKOV_K
    seed: int = 0
    graph_mode: str = "induce"

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigurationError(f"must be a positive integer, got {self.n}", "n")
        if not self.eps >= 0:
            raise ConfigurationError(f"must be >= 0, got {self.eps}", "eps")
        if not self.eps_prime > 0:
            raise ConfigurationError(f"must be > 0, got {self.eps_prime}", "eps_prime")
        if not self.markov_k > 0:
            raise ConfigurationError(f"must be > 0, got {self.markov_k}", "markov_k")
        rates = tuple(float(r) for r in self.rates)
        if len(rates) != 4:
            raise ConfigurationError("expected (R1, R2, R1', R2')", "rates")
        if any(not (r >= 0 and math.isfinite(r)) for r in rates):
            raise ConfigurationError(f"rates must be finite and >= 0, got {rates}", "rates")
        r1, r2, r1p, r2p = rates
        if abs((r1 + r2p) - (r1p + r2)) > SUM_RATE_EQUALITY_TOLERANCE:
            raise ConfigurationError(
                f"R1 + R2' = {r1 + r2p!r} differs from R1' + R2 = {r1p + r2!r}", "rates"
            )
        if self.graph_mode not in GRAPH_MODES:
            raise ConfigurationError(
                f"must be one of {GRAPH_MODES}, got {self.graph_mode!r}", "graph_mode"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("must be a 64-bit unsigned integer", "seed")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "n", int(self.n))

    @property
    def eps_tilde(self) -> float:
        return self.markov_k * self.eps

    @classmethod
    def for_point(
        cls,
        point: Any,
        margin: float,
        *,
        n: int,
        eps: float,
        eps_prime: float,
        markov_k: float = DEFAULT_MARKOV_K,
        seed: int = 0,
        graph_mode: str = "induce",
    ) -> "CodecConfig":
        """Rates of a region point plus ``margin`` on every coordinate."""
        if not margin >= 0:
            raise ConfigurationError(f"must be >= 0, got {margin}", "margin")
        rates = (
            point.r1 + margin,
            point.r2 + margin,
            point.r1p + margin,
            point.r2p + margin,
        )
        return cls(
            n=n,
            eps=eps,
            eps_prime=eps_prime,
            rates=rates,
            markov_k=markov_k,
            seed=seed,
            graph_mode=graph_mode,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "eps": self.eps,
            "eps_prime": self.eps_prime,
            "rates": list(self.rates),
            "markov_k": self.markov_k,
            "seed": self.seed,
            "graph_mode": self.graph_mode,
        }


def stream_rng(cfg: CodecConfig, stream: str, *index: int) -> np.random.Generator:
    """Independent generator for one named stream of the master seed."""
    key = (SEED_STREAMS[stream],) + tuple(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=key))


# ============================================================================
# CODEBOOKS
# ============================================================================


def _unique_rows(codes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(sorted unique codes, first index of each, inverse map)."""
    uniq, first, inverse = np.unique(codes, return_index=True, return_inverse=True)
    return uniq, first, inverse.ravel()


def _bin_layout(bin_of: np.ndarray, n_bins: int) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(bin_of, kind="stable")
    indptr = np.concatenate(([0], np.cumsum(np.bincount(bin_of, minlength=n_bins))))
    return order, indptr


@dataclass(frozen=True, eq=False)
class CodebookPair:
    """Codebooks C1 (X1 sequences) and C2 (V sequences) with their bin maps."""

    c1: np.ndarray  # (N1, n) X1 symbol indices
    c2: np.ndarray  # (N2, n) V symbol indices
    bin1: np.ndarray  # bin index of each C1 codeword
    bin2: np.ndarray
    n_bins1: int
    n_bins2: int
    k1: int  # |X1|
    kv: int  # |V|
    codes1: np.ndarray = field(init=False, repr=False)
    codes2: np.ndarray = field(init=False, repr=False)
    _unique1: Tuple[np.ndarray, np.ndarray, np.ndarray] = field(init=False, repr=False)
    _unique2: Tuple[np.ndarray, np.ndarray, np.ndarray] = field(init=False, repr=False)
    _layout1: Tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)
    _layout2: Tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        codes1 = symbols_to_codes(self.c1, self.k1)
        codes2 = symbols_to_codes(self.c2, self.kv)
        object.__setattr__(self, "codes1", codes1)
        object.__setattr__(self, "codes2", codes2)
        object.__setattr__(self, "_unique1", _unique_rows(codes1))
        object.__setattr__(self, "_unique2", _unique_rows(codes2))
        object.__setattr__(self, "_layout1", _bin_layout(self.bin1, self.n_bins1))
        object.__setattr__(self, "_layout2", _bin_layout(self.bin2, self.n_bins2))

    @property
    def n(self) -> int:
        return int(self.c1.shape[1])

    def bin_members1(self, i: int) -> np.ndarray:
        """Codeword indices of B(i)."""
        order, indptr = self._layout1
        return order[indptr[i] : indptr[i + 1]]

    def bin_members2(self, j: int) -> np.ndarray:
        """Codeword indices of C(j)."""
        order, indptr = self._layout2
        return order[indptr[j] : indptr[j + 1]]

    @property
    def bins1(self) -> List[np.ndarray]:
        return [self.bin_members1(i) for i in range(self.n_bins1)]

    @property
    def bins2(self) -> List[np.ndarray]:
        return [self.bin_members2(j) for j in range(self.n_bins2)]

    def distinct1(self) -> Tuple[np.ndarray, np.ndarray]:
        """(distinct C1 sequences, map codeword -> distinct row)."""
        _, first, inverse = self._unique1
        return self.c1[first], inverse

    def distinct2(self) -> Tuple[np.ndarray, np.ndarray]:
        _, first, inverse = self._unique2
        return self.c2[first], inverse

    def find1(self, code: int) -> Optional[int]:
        """Index of the first C1 codeword equal to the sequence ``code``."""
        uniq, first, _ = self._unique1
        pos = int(np.searchsorted(uniq, code))
        if pos < uniq.size and int(uniq[pos]) == int(code):
            return int(first[pos])
        return None

    def summary(self) -> Dict[str, int]:
        return {
            "codebook1": int(self.c1.shape[0]),
            "codebook2": int(self.c2.shape[0]),
            "distinct1": int(self._unique1[0].size),
            "distinct2": int(self._unique2[0].size),
            "bins1": self.n_bins1,
            "bins2": self.n_bins2,
        }


def codebook_size(n: int, rate: float) -> int:
    """2^{ceil(n R)} codewords, bounded by CODEBOOK_CAP."""
    exponent = max(0, math.ceil(n * rate - 1e-9))
    if exponent > math.log2(CODEBOOK_CAP):
        raise CapacityError("CODEBOOK_CAP", CODEBOOK_CAP, 2.0**exponent)
    return 2**exponent


def draw_typical_sequences(
    p: JointPMF, n: int, eps: float, count: int, rng: np.random.Generator
) -> np.ndarray:
    """``count`` sequences drawn from the strongly typical set of a one-axis PMF.

    Exact uniform draws from the enumerated set when it is small enough,
    otherwise i.i.d. draws from p conditioned on typicality by rejection.
    """
    k = p.shape[0]
    params = TypicalityParams(eps, n)
    if float(k) ** n <= EXACT_ENUMERATION_THRESHOLD:
        codes = typical_codes(p, params)
        if codes.size == 0:
            raise ConfigurationError(
                f"strongly typical set is empty at n={n}, eps={eps}", "eps"
            )
        picks = codes[rng.integers(codes.size, size=count)]
        return codes_to_symbols(picks, k, n)

    accepted: List[np.ndarray] = []
    have = 0
    batch = max(1024, 2 * count)
    for _ in range(REJECTION_MAX_ROUNDS):
        draws = sample_iid(p, n, batch, rng)
        keep = draws[typical_mask(draws, p.mass, eps)]
        accepted.append(keep)
        have += keep.shape[0]
        if have >= count:
            return np.concatenate(accepted)[:count]
    raise ConfigurationError(
        f"rejection sampling found {have} of {count} typical sequences at "
        f"n={n}, eps={eps}; the typical set is empty or too rare",
        "eps",
    )


def _assign_bins(count: int, n_bins: int, rng: np.random.Generator) -> np.ndarray:
    """Contiguous blocks of a seeded permutation; empty bins allowed."""
    bin_of = np.empty(count, dtype=np.int64)
    for b, chunk in enumerate(np.array_split(rng.permutation(count), n_bins)):
        bin_of[chunk] = b
    return bin_of


def generate_codebooks(joint: JointPMF, cfg: CodecConfig) -> CodebookPair:
    """Draw C1 and C2 from the typical sets of p(x1) and p(v) and bin them."""
    if joint.arity != 3:
        raise ConfigurationError("codec needs a composed (X1, X2, V) joint", "joint")
    p_x1 = joint.marginal(0)
    p_v = joint.marginal(2)
    k1, kv = p_x1.shape[0], p_v.shape[0]
    check_code_capacity(k1, cfg.n)
    check_code_capacity(kv, cfg.n)

    h_x1 = entropy(joint, 0)
    i_vx2 = mutual_information(joint, 2, 1)
    size1 = codebook_size(cfg.n, h_x1 + cfg.eps)
    size2 = codebook_size(cfg.n, i_vx2 + cfg.eps)
    n_bins1 = bin_count(cfg.n, cfg.rates[0])
    n_bins2 = bin_count(cfg.n, cfg.rates[1])

    with log_operation(
        slog, "generate_codebooks", n=cfg.n, size1=size1, size2=size2,
        bins1=n_bins1, bins2=n_bins2,
    ):
        c1 = draw_typical_sequences(p_x1, cfg.n, cfg.eps, size1, stream_rng(cfg, "codebook1"))
        c2 = draw_typical_sequences(p_v, cfg.n, cfg.eps, size2, stream_rng(cfg, "codebook2"))
        bin1 = _assign_bins(size1, n_bins1, stream_rng(cfg, "bins1"))
        bin2 = _assign_bins(size2, n_bins2, stream_rng(cfg, "bins2"))
    return CodebookPair(c1, c2, bin1, bin2, n_bins1, n_bins2, k1, kv)


# ============================================================================
# GRAPH INDUCTION AND DEGREE EVENTS
# ============================================================================


def _incidence(bin_of: np.ndarray, inverse: np.ndarray, n_bins: int, n_distinct: int):
    pairs = np.unique(np.stack([bin_of, inverse], axis=1), axis=0)
    data = np.ones(pairs.shape[0], dtype=np.int64)
    return sparse.csr_matrix(
        (data, (pairs[:, 0], pairs[:, 1])), shape=(n_bins, n_distinct)
    )


def induce_graph(cb: CodebookPair, cfg: CodecConfig, joint: JointPMF) -> BipartiteGraph:
    """Edge (i, j) iff some (x1, v) in B(i) x C(j) is eps-typical under p(x1, v)."""
    xs, inv1 = cb.distinct1()
    vs, inv2 = cb.distinct2()
    pairs = float(xs.shape[0]) * float(vs.shape[0])
    if pairs > PAIR_SCAN_CAP:
        raise CapacityError("PAIR_SCAN_CAP", PAIR_SCAN_CAP, pairs)

    with log_operation(slog, "induce_graph", distinct1=xs.shape[0], distinct2=vs.shape[0]) as op:
        typical = pairwise_typical(xs, vs, joint.marginal((0, 2)), cfg.eps)
        m1 = _incidence(cb.bin1, inv1, cb.n_bins1, xs.shape[0])
        m2 = _incidence(cb.bin2, inv2, cb.n_bins2, vs.shape[0])

        t_sparse = sparse.csr_matrix(typical, dtype=np.int64)
        del typical

        # Upper bound on edges before forming the product.
        mult1 = np.asarray(m1.sum(axis=0)).ravel().astype(float)
        mult2 = np.asarray(m2.sum(axis=0)).ravel().astype(float)
        bound = float(mult1 @ (t_sparse @ mult2))
        if bound > GRAPH_EDGE_CAP:
            raise CapacityError("GRAPH_EDGE_CAP", GRAPH_EDGE_CAP, bound)

        product = (m1 @ t_sparse @ m2.T).tocoo()
        edges = np.stack([product.row, product.col], axis=1)
        graph = BipartiteGraph(cb.n_bins1, cb.n_bins2, edges[product.data > 0])
        op["edges"] = graph.edge_count
    return graph


def degree_params(g: BipartiteGraph, cfg: CodecConfig) -> SemiRegularParams:
    """(|V1|, |V2|, 2^{nR1'}, 2^{nR2'}, 2^{n eps'}) for an induced graph."""
    nominal = graph_parameters(cfg.n, cfg.rates, cfg.eps_prime)
    return replace(nominal, delta1=g.n1, delta2=g.n2)


def check_degree_events(g: BipartiteGraph, cfg: CodecConfig) -> Tuple[bool, bool]:
    """(E1, E2): some first-side degree outside 2^{n(R2' +- eps')}, resp.
    some second-side degree outside 2^{n(R1' +- eps')}. Degree 0 violates."""
    report = check_nearly_semi_regular(g, degree_params(g, cfg))
    e1 = any(v.kind == "degree1" for v in report.violations)
    e2 = any(v.kind == "degree2" for v in report.violations)
    return e1, e2


@dataclass(frozen=True)
class DegreeEventEstimate:
    """P(E1 u E2) over codebook realisations and the cross-check outcome."""

    seeds: Tuple[int, ...]
    e1: Tuple[bool, ...]
    e2: Tuple[bool, ...]
    semi_regular_on_clean: Tuple[bool, ...]  # one entry per event-free seed

    @property
    def event_rate(self) -> float:
        hits = sum(1 for a, b in zip(self.e1, self.e2) if a or b)
        return hits / len(self.seeds) if self.seeds else 0.0

    @property
    def consistent(self) -> bool:
        return all(self.semi_regular_on_clean)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "runs": len(self.seeds),
            "event_rate": self.event_rate,
            "e1_rate": sum(self.e1) / max(1, len(self.seeds)),
            "e2_rate": sum(self.e2) / max(1, len(self.seeds)),
            "clean_runs": len(self.semi_regular_on_clean),
            "consistent": self.consistent,
        }


def estimate_degree_events(
    joint: JointPMF, cfg: CodecConfig, seeds: Sequence[int]
) -> DegreeEventEstimate:
    """Run codebook generation + induction per seed and record E1 / E2."""
    e1s: List[bool] = []
    e2s: List[bool] = []
    clean: List[bool] = []
    with log_operation(slog, "estimate_degree_events", runs=len(seeds), n=cfg.n):
        for seed in seeds:
            run_cfg = replace(cfg, seed=int(seed))
            graph = induce_graph(generate_codebooks(joint, run_cfg), run_cfg, joint)
            e1, e2 = check_degree_events(graph, run_cfg)
            e1s.append(e1)
            e2s.append(e2)
            if not (e1 or e2):
                clean.append(check_nearly_semi_regular(graph, degree_params(graph, run_cfg)).ok)
    return DegreeEventEstimate(tuple(int(s) for s in seeds), tuple(e1s), tuple(e2s), tuple(clean))


# ============================================================================
# ENCODERS AND DECODER
# ============================================================================


def _as_symbols(seq: Any) -> np.ndarray:
    if isinstance(seq, SymbolSequence):
        return np.asarray(seq.symbols, dtype=np.int64)
    return np.asarray(seq, dtype=np.int64).ravel()


def find_codeword1(x1: Any, cb: CodebookPair) -> Optional[int]:
    """First C1 codeword equal to x1, or None."""
    code = int(symbols_to_codes(_as_symbols(x1)[None, :], cb.k1)[0])
    return cb.find1(code)


def typical_candidates2(
    x2: Any, cb: CodebookPair, cfg: CodecConfig, joint: JointPMF
) -> np.ndarray:
    """C2 codeword indices jointly eps-typical with x2 under p(x2, v)."""
    vs, inverse = cb.distinct2()
    mask = pairwise_typical(_as_symbols(x2)[None, :], vs, joint.marginal((1, 2)), cfg.eps)[0]
    return np.flatnonzero(mask[inverse])


def choose_codeword2(
    x2: Any, cb: CodebookPair, cfg: CodecConfig, joint: JointPMF, trial: int = 0
) -> Optional[int]:
    """First jointly typical codeword in a seeded scan order, or None."""
    candidates = typical_candidates2(x2, cb, cfg, joint)
    if candidates.size == 0:
        return None
    scan = stream_rng(cfg, "encoder", trial, 2).permutation(candidates)
    return int(scan[0])


def encode1(x1: Any, cb: CodebookPair, cfg: CodecConfig, trial: int = 0) -> int:
    """Bin of the exact codeword match, else a seeded uniform bin index."""
    k = find_codeword1(x1, cb)
    if k is not None:
        return int(cb.bin1[k])
    return int(stream_rng(cfg, "encoder", trial, 1).integers(cb.n_bins1))


def encode2(
    x2: Any, cb: CodebookPair, cfg: CodecConfig, joint: JointPMF, trial: int = 0
) -> int:
    """Bin of the chosen jointly typical codeword, else a seeded uniform bin."""
    chosen = choose_codeword2(x2, cb, cfg, joint, trial)
    if chosen is not None:
        return int(cb.bin2[chosen])
    return int(stream_rng(cfg, "encoder", trial, 3).integers(cb.n_bins2))


def _bin_sequences(cb: CodebookPair, i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """Distinct sequences of B(i) and of C(j)."""
    m1 = cb.bin_members1(i)
    m2 = cb.bin_members2(j)
    xs = cb.c1[m1]
    vs = cb.c2[m2]
    if xs.shape[0] > 1:
        xs = np.unique(xs, axis=0)
    if vs.shape[0] > 1:
        vs = np.unique(vs, axis=0)
    pairs = float(xs.shape[0]) * float(vs.shape[0])
    if pairs > PAIR_SCAN_CAP:
        raise CapacityError("PAIR_SCAN_CAP", PAIR_SCAN_CAP, pairs)
    return xs, vs


def _validate_recon(recon: np.ndarray, joint: JointPMF) -> np.ndarray:
    recon = np.asarray(recon, dtype=np.int64)
    expected = (joint.shape[0], joint.shape[2])
    if recon.shape != expected:
        raise ConfigurationError(
            f"reconstruction table has shape {recon.shape}, expected {expected}", "recon"
        )
    if recon.size and recon.min() < 0:
        raise ConfigurationError("reconstruction symbols must be >= 0", "recon")
    return recon


def decode(
    i: int,
    j: int,
    cb: CodebookPair,
    cfg: CodecConfig,
    joint: JointPMF,
    recon: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """The unique eps~-typical (x1, v) in B(i) x C(j) under p(x1, v).

    Returns (x1_hat, x2_hat) with x2_hat[m] = recon[x1[m], v[m]]; raises
    DecodeError when there is no such pair or more than one.
    """
    recon = _validate_recon(recon, joint)
    xs, vs = _bin_sequences(cb, i, j)
    if xs.shape[0] == 0 or vs.shape[0] == 0:
        raise DecodeError(DecodeError.NO_CANDIDATE)
    typical = pairwise_typical(xs, vs, joint.marginal((0, 2)), cfg.eps_tilde)
    count = int(typical.sum())
    if count == 0:
        raise DecodeError(DecodeError.NO_CANDIDATE)
    if count > 1:
        raise DecodeError(DecodeError.AMBIGUOUS, count)
    a, b = np.argwhere(typical)[0]
    x1_hat = xs[a].copy()
    return x1_hat, recon[x1_hat, vs[b]]


def _other_triple_typical(
    xs: np.ndarray,
    vs: np.ndarray,
    x2: np.ndarray,
    exclude: Tuple[Optional[int], Optional[int]],
    joint: JointPMF,
    eps: float,
    k1: int,
    kv: int,
) -> bool:
    """E7: some (x1', v') != (x1, v) in the bin product with (x1', x2, v') eps~-typical."""
    if xs.shape[0] == 0 or vs.shape[0] == 0:
        return False
    _, k2, _ = joint.shape
    flat = (xs[:, None, :] * k2 + x2[None, None, :]) * kv + vs[None, :, :]
    mask = typical_mask(flat.reshape(-1, x2.size), joint.mass, eps).reshape(
        xs.shape[0], vs.shape[0]
    )
    x_code, v_code = exclude
    if x_code is not None and v_code is not None:
        rows = np.flatnonzero(symbols_to_codes(xs, k1) == x_code)
        cols = np.flatnonzero(symbols_to_codes(vs, kv) == v_code)
        if rows.size and cols.size:
            mask[rows[0], cols[0]] = False
    return bool(mask.any())


# ============================================================================
# MONTE-CARLO
# ============================================================================


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one source block."""

    trial: int
    events: Dict[str, Optional[bool]]
    decode_status: str  # "success", "NoCandidate" or "Ambiguous"
    ambiguous_count: int
    decoded_correct: bool
    distortion_x1: float
    distortion_x2: float
    decoded: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    @property
    def decode_error(self) -> bool:
        return self.decode_status != "success" or not self.decoded_correct

    @property
    def any_event(self) -> bool:
        return any(self.events.get(name) for name in ("e3", "e4", "e5", "e6", "e7"))

    @property
    def clean(self) -> bool:
        """No trial-level event and a correct decode."""
        return not self.any_event and not self.decode_error


@dataclass
class TrialAggregate:
    """Empirical frequencies and distortions over all trials of one config."""

    n: int
    trials: int
    event_counts: Dict[str, int]
    graph_events: Tuple[Optional[bool], Optional[bool]]
    outcomes: Dict[str, int]
    decode_errors: int
    tau_x1: float
    tau_x2: float
    d_max: float
    expected_distortion: float
    eps_tilde: float
    clean_trials: int
    clean_tau_x2: Optional[float]
    max_clean_tau_x2: Optional[float]
    graph_summary: Optional[Dict[str, Any]] = None
    codebook_summary: Dict[str, int] = field(default_factory=dict)

    @property
    def event_rates(self) -> Dict[str, Optional[float]]:
        rates: Dict[str, Optional[float]] = {}
        e1, e2 = self.graph_events
        rates["e1"] = None if e1 is None else float(e1)
        rates["e2"] = None if e2 is None else float(e2)
        for name in ("e3", "e4", "e5", "e6", "e7"):
            rates[name] = self.event_counts[name] / self.trials
        return rates

    @property
    def decode_error_rate(self) -> float:
        return self.decode_errors / self.trials

    @property
    def p_error(self) -> float:
        """Fraction of trials with any of E3..E7 or a decode error."""
        return (self.trials - self.clean_trials) / self.trials

    @property
    def eps_star(self) -> float:
        """Distortion spread of eps~-typical triples: eps~ * D."""
        return self.eps_tilde * self.expected_distortion

    @property
    def distortion_bound(self) -> float:
        """(1 - P(E)) (D + eps*) + P(E) d_max."""
        p = self.p_error
        return (1 - p) * (self.expected_distortion + self.eps_star) + p * self.d_max

    def to_row(self) -> List[Any]:
        rates = self.event_rates
        summary = self.graph_summary or {}
        return [
            self.n,
            self.trials,
            *[rates[name] for name in EVENT_NAMES],
            self.decode_error_rate,
            self.tau_x1,
            self.tau_x2,
            summary.get("edges"),
            summary.get("min_degree1"),
            summary.get("max_degree1"),
            summary.get("min_degree2"),
            summary.get("max_degree2"),
            self.expected_distortion,
            self.eps_star,
            self.distortion_bound,
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "trials": self.trials,
            "event_rates": self.event_rates,
            "event_counts": dict(self.event_counts),
            "outcomes": dict(self.outcomes),
            "decode_error_rate": self.decode_error_rate,
            "tau_x1": self.tau_x1,
            "tau_x2": self.tau_x2,
            "d_max": self.d_max,
            "expected_distortion": self.expected_distortion,
            "eps_star": self.eps_star,
            "p_error": self.p_error,
            "distortion_bound": self.distortion_bound,
            "clean_trials": self.clean_trials,
            "clean_tau_x2": self.clean_tau_x2,
            "graph": self.graph_summary,
            "codebooks": dict(self.codebook_summary),
            "degree_event_fallback": "induced graph kept; events recorded",
        }


def draw_source_block(source: JointPMF, cfg: CodecConfig, trial: int) -> Tuple[np.ndarray, np.ndarray]:
    """i.i.d. (x1, x2) block for one trial."""
    flat = sample_iid(source, cfg.n, 1, stream_rng(cfg, "trial", trial))[0]
    x1, x2 = np.unravel_index(flat, source.shape)
    return x1.astype(np.int64), x2.astype(np.int64)


def run_trial(
    trial: int,
    x1: np.ndarray,
    x2: np.ndarray,
    cb: CodebookPair,
    cfg: CodecConfig,
    joint: JointPMF,
    recon: np.ndarray,
    d_x2: np.ndarray,
    graph_events: Tuple[Optional[bool], Optional[bool]] = (None, None),
) -> TrialResult:
    """Encode, decode and account one source block."""
    n = cfg.n
    k1, k2, kv = joint.shape
    source_mass = joint.marginal((0, 1)).mass

    e3 = not bool(typical_mask((x1 * k2 + x2)[None, :], source_mass, cfg.eps)[0])

    k = find_codeword1(x1, cb)
    e4 = k is None
    i = int(cb.bin1[k]) if k is not None else encode1(x1, cb, cfg, trial)

    chosen = choose_codeword2(x2, cb, cfg, joint, trial)
    e5 = chosen is None
    j = int(cb.bin2[chosen]) if chosen is not None else encode2(x2, cb, cfg, joint, trial)

    e6 = False
    v_code: Optional[int] = None
    if chosen is not None:
        v = cb.c2[chosen]
        v_code = int(cb.codes2[chosen])
        triple = (x1 * k2 + x2) * kv + v
        e6 = not bool(typical_mask(triple[None, :], joint.mass, cfg.eps_tilde)[0])

    xs, vs = _bin_sequences(cb, i, j)
    x1_code = int(symbols_to_codes(x1[None, :], k1)[0])
    e7 = _other_triple_typical(
        xs, vs, x2, (x1_code, v_code), joint, cfg.eps_tilde, k1, kv
    )

    status = "success"
    count = 0
    try:
        x1_hat, x2_hat = decode(i, j, cb, cfg, joint, recon)
        decoded: Optional[Tuple[np.ndarray, np.ndarray]] = (x1_hat, x2_hat)
    except DecodeError as exc:
        status = exc.kind
        count = exc.count
        x1_hat = np.zeros(n, dtype=np.int64)
        x2_hat = np.zeros(n, dtype=np.int64)
        decoded = None

    correct = status == "success" and bool(np.array_equal(x1_hat, x1))
    return TrialResult(
        trial=trial,
        events={
            "e1": graph_events[0],
            "e2": graph_events[1],
            "e3": e3,
            "e4": e4,
            "e5": e5,
            "e6": e6,
            "e7": e7,
        },
        decode_status=status,
        ambiguous_count=count,
        decoded_correct=correct,
        distortion_x1=float(np.mean(x1_hat != x1)),
        distortion_x2=float(np.mean(d_x2[x2, x2_hat])),
        decoded=decoded,
    )


def expected_distortion_of(joint: JointPMF, recon: np.ndarray, d_x2: np.ndarray) -> float:
    """E d(X2, recon(X1, V)) under a composed (X1, X2, V) joint."""
    x1, x2, v = np.indices(joint.shape)
    return float(np.sum(joint.mass * d_x2[x2, recon[x1, v]]))


def aggregate_trials(
    results: Sequence[TrialResult],
    cfg: CodecConfig,
    d_max: float,
    expected: float,
    graph_events: Tuple[Optional[bool], Optional[bool]],
    graph_summary: Optional[Dict[str, Any]] = None,
    codebook_summary: Optional[Dict[str, int]] = None,
) -> TrialAggregate:
    """Commutative reduction of per-trial results."""
    counts = {name: sum(1 for r in results if r.events.get(name)) for name in EVENT_NAMES[2:]}
    outcomes = {
        "success": sum(1 for r in results if r.decode_status == "success" and r.decoded_correct),
        DecodeError.NO_CANDIDATE: sum(1 for r in results if r.decode_status == DecodeError.NO_CANDIDATE),
        DecodeError.AMBIGUOUS: sum(1 for r in results if r.decode_status == DecodeError.AMBIGUOUS),
        "wrong_unique": sum(1 for r in results if r.decode_status == "success" and not r.decoded_correct),
    }
    clean = [r for r in results if r.clean]
    clean_tau = [r.distortion_x2 for r in clean]
    return TrialAggregate(
        n=cfg.n,
        trials=len(results),
        event_counts=counts,
        graph_events=graph_events,
        outcomes=outcomes,
        decode_errors=sum(1 for r in results if r.decode_error),
        tau_x1=float(np.mean([r.distortion_x1 for r in results])),
        tau_x2=float(np.mean([r.distortion_x2 for r in results])),
        d_max=d_max,
        expected_distortion=expected,
        eps_tilde=cfg.eps_tilde,
        clean_trials=len(clean),
        clean_tau_x2=float(np.mean(clean_tau)) if clean_tau else None,
        max_clean_tau_x2=float(np.max(clean_tau)) if clean_tau else None,
        graph_summary=graph_summary,
        codebook_summary=dict(codebook_summary or {}),
    )


def run_monte_carlo(
    source: JointPMF,
    aux: CondPMF,
    recon: np.ndarray,
    d_x2: np.ndarray,
    cfg: CodecConfig,
    trials: int,
) -> TrialAggregate:
    """Build one codebook realisation and run ``trials`` i.i.d. source blocks."""
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise ConfigurationError(f"must be >= 1, got {trials}", "trials")
    joint = compose_markov(source, aux)
    recon = _validate_recon(recon, joint)
    d_x2 = np.asarray(d_x2, dtype=float)
    if d_x2.ndim != 2 or d_x2.shape[0] != joint.shape[1]:
        raise ConfigurationError(
            f"distortion matrix has shape {d_x2.shape}, expected ({joint.shape[1]}, k)",
            "distortion",
        )
    if recon.size and recon.max() >= d_x2.shape[1]:
        raise ConfigurationError("reconstruction symbol outside the distortion columns", "recon")
    if np.any(d_x2 < 0) or not np.all(np.isfinite(d_x2)):
        raise ConfigurationError("entries must be finite and nonnegative", "distortion")

    started = time.perf_counter()
    with log_operation(slog, "run_monte_carlo", n=cfg.n, trials=trials, seed=cfg.seed) as op:
        cb = generate_codebooks(joint, cfg)
        graph_events: Tuple[Optional[bool], Optional[bool]] = (None, None)
        graph_summary: Optional[Dict[str, Any]] = None
        if cfg.graph_mode == "induce":
            graph = induce_graph(cb, cfg, joint)
            graph_events = check_degree_events(graph, cfg)
            graph_summary = graph.summary()
            if any(graph_events):
                logger.info(
                    "Degree events fired (E1=%s, E2=%s); continuing with the induced graph",
                    graph_events[0],
                    graph_events[1],
                )

        results = []
        for t in range(trials):
            x1, x2 = draw_source_block(source, cfg, t)
            results.append(run_trial(t, x1, x2, cb, cfg, joint, recon, d_x2, graph_events))

        aggregate = aggregate_trials(
            results,
            cfg,
            d_max=float(d_x2.max()),
            expected=expected_distortion_of(joint, recon, d_x2),
            graph_events=graph_events,
            graph_summary=graph_summary,
            codebook_summary=cb.summary(),
        )
        op["decode_error_rate"] = aggregate.decode_error_rate

    elapsed = max(time.perf_counter() - started, 1e-9)
    log_performance_metrics(
        slog,
        {"operation": "run_monte_carlo", "trials": trials, "trials_per_second": trials / elapsed},
    )
    return aggregate

