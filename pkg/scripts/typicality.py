#!/usr/bin/env python3
"""
Strong typicality - per-sequence tests, vectorised batch tests, exhaustive
typical-set enumeration and the cardinality bounds of typical sets.

Typicality is the relative form: a sequence (or an aligned tuple of
sequences) is strongly eps-typical for p when every joint symbol a satisfies
|N(a)/n - p(a)| <= eps * p(a). Symbols outside the support of p must not
occur at all, which the relative form enforces by itself.

Sequences are handled in bulk as integer arrays of flattened joint-symbol
indices; an n-length sequence over K joint symbols is also identified by its
base-K integer code (first symbol most significant), so sorting codes sorts
sequences lexicographically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import (
    DEFAULT_WORKERS,
    ENUMERATION_CAP,
    ENUMERATION_CHUNK,
    EPS_PRIME_MARGIN,
    PAIR_BLOCK_ELEMENTS,
    SEQUENCE_CODE_CAP,
    TYPICALITY_SLACK,
    setup_logging,
)
from errors import ArgumentError, CapacityError
from logging_utils import StructuredLogger, log_operation
from probcore import Alphabet, JointPMF, entropy

logger = setup_logging("typicality")
slog = StructuredLogger("typicality")


# ============================================================================
# TYPES
# ============================================================================


@dataclass(frozen=True)
class SymbolSequence:
    """A length-n sequence of symbol indices over ``alphabet``."""

    alphabet: Alphabet
    symbols: Tuple[int, ...]

    def __post_init__(self) -> None:
        symbols = tuple(int(s) for s in self.symbols)
        if not symbols:
            raise ArgumentError("sequence length must be >= 1")
        if min(symbols) < 0 or max(symbols) >= self.alphabet.size:
            raise ArgumentError(
                f"sequence symbols must lie in [0, {self.alphabet.size})"
            )
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def from_string(cls, text: str, alphabet: Optional[Alphabet] = None) -> "SymbolSequence":
        """Parse single-character labels, e.g. "0011" over {0, 1}."""
        alpha = alphabet or Alphabet.of_size(2)
        return cls(alpha, tuple(alpha.index(ch) for ch in text))

    @property
    def n(self) -> int:
        return len(self.symbols)

    def to_string(self) -> str:
        return "".join(self.alphabet.labels[s] for s in self.symbols)


@dataclass(frozen=True)
class TypicalityParams:
    """Typicality tolerance eps and block length n."""

    epsilon: float
    n: int

    def __post_init__(self) -> None:
        if not self.epsilon >= 0:
            raise ArgumentError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n < 1:
            raise ArgumentError(f"block length must be >= 1, got {self.n}")


@dataclass(frozen=True)
class CardinalityRecord:
    """Size of one typical set against its entropy."""

    component: str
    size: int
    entropy: float
    rate: float  # log2(size) / n, -inf for an empty set
    deviation: float  # |rate - entropy|

    def to_dict(self) -> Dict[str, object]:
        return {
            "component": self.component,
            "size": self.size,
            "entropy": self.entropy,
            "rate": self.rate,
            "deviation": self.deviation,
        }


SequenceInput = Union[SymbolSequence, Sequence[SymbolSequence]]


def _as_sequence_tuple(seqs: SequenceInput) -> Tuple[SymbolSequence, ...]:
    if isinstance(seqs, SymbolSequence):
        return (seqs,)
    result = tuple(seqs)
    if not result:
        raise ArgumentError("at least one sequence is required")
    lengths = {s.n for s in result}
    if len(lengths) != 1:
        raise ArgumentError(f"aligned sequences must share length, got {sorted(lengths)}")
    return result


# ============================================================================
# SEQUENCE CODES
# ============================================================================


def joint_symbols(columns: Sequence[np.ndarray], shape: Sequence[int]) -> np.ndarray:
    """Combine aligned per-axis symbol arrays into flattened joint-symbol indices."""
    return np.ravel_multi_index(tuple(np.asarray(c) for c in columns), tuple(shape))


def check_code_capacity(k: int, n: int) -> None:
    """Raise CapacityError when k**n does not fit an int64 sequence code."""
    if n * math.log2(max(k, 1)) >= math.log2(SEQUENCE_CODE_CAP):
        raise CapacityError("SEQUENCE_CODE_CAP", SEQUENCE_CODE_CAP, float(k) ** n)


def symbols_to_codes(symbols: np.ndarray, k: int) -> np.ndarray:
    """Base-k codes of the rows of an (N, n) symbol array."""
    symbols = np.atleast_2d(np.asarray(symbols, dtype=np.int64))
    check_code_capacity(k, symbols.shape[1])
    codes = np.zeros(symbols.shape[0], dtype=np.int64)
    for column in symbols.T:
        codes = codes * k + column
    return codes


def codes_to_symbols(codes: np.ndarray, k: int, n: int) -> np.ndarray:
    """Inverse of ``symbols_to_codes``: an (N, n) array of symbol indices."""
    remaining = np.asarray(codes, dtype=np.int64).copy()
    symbols = np.empty((remaining.shape[0], n), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        remaining, symbols[:, t] = np.divmod(remaining, k)
    return symbols


# ============================================================================
# TYPICALITY TESTS
# ============================================================================


def empirical_pmf(seqs: SequenceInput) -> JointPMF:
    """Joint type of aligned sequences: counts / n over the product alphabet."""
    seq_tuple = _as_sequence_tuple(seqs)
    axes = tuple(s.alphabet for s in seq_tuple)
    shape = tuple(a.size for a in axes)
    flat = joint_symbols([np.array(s.symbols) for s in seq_tuple], shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape)))
    return JointPMF(axes, counts.reshape(shape) / seq_tuple[0].n)


def typical_mask(symbols: np.ndarray, pmf: np.ndarray, eps: float) -> np.ndarray:
    """Vectorised strong-typicality test.

    ``symbols`` is an (N, n) array of flattened joint-symbol indices and
    ``pmf`` the flattened joint PMF; returns a boolean array of length N.
    """
    symbols = np.atleast_2d(np.asarray(symbols, dtype=np.int64))
    p = np.asarray(pmf, dtype=float).ravel()
    k = p.size
    count, n = symbols.shape
    offsets = (np.arange(count, dtype=np.int64) * k)[:, None]
    counts = np.bincount((symbols + offsets).ravel(), minlength=count * k)
    freq = counts.reshape(count, k) / n
    return np.all(np.abs(freq - p[None, :]) <= eps * p[None, :] + TYPICALITY_SLACK, axis=1)


def is_strongly_typical(seqs: SequenceInput, p: JointPMF, eps: float) -> bool:
    """True iff the aligned sequences are strongly eps-typical for ``p``."""
    seq_tuple = _as_sequence_tuple(seqs)
    if tuple(s.alphabet.size for s in seq_tuple) != p.shape:
        raise ArgumentError(
            f"sequence alphabets {[s.alphabet.size for s in seq_tuple]} do not "
            f"match PMF shape {p.shape}"
        )
    flat = joint_symbols([np.array(s.symbols) for s in seq_tuple], p.shape)
    return bool(typical_mask(flat[None, :], p.mass, eps)[0])


def pairwise_typical(
    xs: np.ndarray, vs: np.ndarray, p2: JointPMF, eps: float
) -> np.ndarray:
    """Joint typicality of every (x, v) pair from two sequence batches.

    ``xs`` is (A, n) over the first axis of ``p2``, ``vs`` is (B, n) over the
    second. Pair counts come from one-hot products, blocked over rows of
    ``xs`` to bound memory. Returns an (A, B) boolean matrix.
    """
    if p2.arity != 2:
        raise ArgumentError("pairwise typicality needs a two-axis PMF")
    xs = np.atleast_2d(np.asarray(xs, dtype=np.int64))
    vs = np.atleast_2d(np.asarray(vs, dtype=np.int64))
    if xs.shape[1] != vs.shape[1]:
        raise ArgumentError("sequence batches must share block length")
    kx, kv = p2.shape
    n = xs.shape[1]
    a_count, b_count = xs.shape[0], vs.shape[0]
    result = np.zeros((a_count, b_count), dtype=bool)
    if a_count == 0 or b_count == 0:
        return result

    p = p2.mass
    lower = p - eps * p - TYPICALITY_SLACK
    upper = p + eps * p + TYPICALITY_SLACK

    # (n, B * kv) one-hot of the v batch
    v_onehot = np.zeros((b_count, n, kv), dtype=np.float32)
    np.put_along_axis(v_onehot, vs[:, :, None], 1.0, axis=2)
    v_matrix = v_onehot.transpose(1, 0, 2).reshape(n, b_count * kv)

    block = max(1, PAIR_BLOCK_ELEMENTS // max(1, b_count * kx * kv))
    for start in range(0, a_count, block):
        chunk = xs[start : start + block]
        x_onehot = np.zeros((chunk.shape[0], n, kx), dtype=np.float32)
        np.put_along_axis(x_onehot, chunk[:, :, None], 1.0, axis=2)
        x_matrix = x_onehot.transpose(0, 2, 1).reshape(chunk.shape[0] * kx, n)
        counts = (x_matrix @ v_matrix).reshape(chunk.shape[0], kx, b_count, kv)
        freq = counts.transpose(0, 2, 1, 3) / n
        ok = (freq >= lower) & (freq <= upper)
        result[start : start + chunk.shape[0]] = ok.all(axis=(2, 3))
    return result


# ============================================================================
# ENUMERATION
# ============================================================================


def _scan_chunk(start: int, stop: int, k: int, n: int, pmf: np.ndarray, eps: float) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    mask = typical_mask(codes_to_symbols(codes, k, n), pmf, eps)
    return codes[mask]


def typical_codes(
    p: JointPMF, params: TypicalityParams, workers: Optional[int] = None
) -> np.ndarray:
    """Sorted base-K codes of every strongly typical sequence (K = joint alphabet size)."""
    k = int(np.prod(p.shape))
    n = params.n
    total = float(k) ** n
    if total > ENUMERATION_CAP:
        raise CapacityError("ENUMERATION_CAP", ENUMERATION_CAP, total)
    total_int = k**n
    pmf = p.mass.ravel()
    starts = range(0, total_int, ENUMERATION_CHUNK)

    with log_operation(slog, "enumerate_typical_set", k=k, n=n, eps=params.epsilon) as op:
        if len(starts) == 1:
            parts = [_scan_chunk(0, total_int, k, n, pmf, params.epsilon)]
        else:
            with ThreadPoolExecutor(max_workers=workers or DEFAULT_WORKERS) as executor:
                parts = list(
                    executor.map(
                        lambda s: _scan_chunk(
                            s, min(s + ENUMERATION_CHUNK, total_int), k, n, pmf, params.epsilon
                        ),
                        starts,
                    )
                )
        codes = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        op["scanned"] = total_int
        op["typical"] = int(codes.size)
    return codes


def enumerate_typical_set(
    p: JointPMF, params: TypicalityParams, workers: Optional[int] = None
) -> List[Tuple[SymbolSequence, ...]]:
    """Every strongly typical aligned tuple of sequences, in lexicographic order."""
    codes = typical_codes(p, params, workers)
    k = int(np.prod(p.shape))
    flat = codes_to_symbols(codes, k, params.n)
    per_axis = np.unravel_index(flat, p.shape)
    result: List[Tuple[SymbolSequence, ...]] = []
    for row in range(flat.shape[0]):
        result.append(
            tuple(
                SymbolSequence(p.axes[a], tuple(per_axis[a][row]))
                for a in range(p.arity)
            )
        )
    return result


def typical_set_size(
    p: JointPMF, params: TypicalityParams, workers: Optional[int] = None
) -> int:
    return int(typical_codes(p, params, workers).size)


def _component_record(
    name: str, p: JointPMF, params: TypicalityParams, workers: Optional[int]
) -> CardinalityRecord:
    size = typical_set_size(p, params, workers)
    h = entropy(p, tuple(range(p.arity)))
    if size == 0:
        logger.warning(
            "Typical set of %s is empty at n=%d eps=%g", name, params.n, params.epsilon
        )
        return CardinalityRecord(name, 0, h, -math.inf, math.inf)
    rate = math.log2(size) / params.n
    return CardinalityRecord(name, size, h, rate, abs(rate - h))


def cardinality_records(
    p: JointPMF, params: TypicalityParams, workers: Optional[int] = None
) -> List[CardinalityRecord]:
    """Typical-set sizes for each single-axis marginal and, for arity > 1, the joint."""
    if p.arity == 1:
        return [_component_record("X", p, params, workers)]
    records = [
        _component_record(f"X{axis + 1}", p.marginal(axis), params, workers)
        for axis in range(p.arity)
    ]
    records.append(_component_record("joint", p, params, workers))
    return records


def measure_epsilon1(
    p: JointPMF, params: TypicalityParams, workers: Optional[int] = None
) -> float:
    """Smallest eps1 with 2^{n(H-eps1)} <= |A| <= 2^{n(H+eps1)} for every component.

    Infinite when some typical set is empty.
    """
    return max(r.deviation for r in cardinality_records(p, params, workers))


def cardinality_bounds_hold(record: CardinalityRecord, eps1: float, n: int) -> bool:
    """Check 2^{n(H - eps1)} <= size <= 2^{n(H + eps1)} with float slack."""
    if record.size == 0:
        return False
    log_size = math.log2(record.size)
    slack = 1e-9 * max(1.0, n)
    return n * (record.entropy - eps1) - slack <= log_size <= n * (record.entropy + eps1) + slack


def epsilon_prime_for(
    p: JointPMF,
    params: TypicalityParams,
    margin: float = EPS_PRIME_MARGIN,
    workers: Optional[int] = None,
) -> float:
    """Degree slackness eps' = 3 * measured eps1 + margin."""
    eps1 = measure_epsilon1(p, params, workers)
    if not math.isfinite(eps1):
        raise ArgumentError(
            f"eps1 is undefined at n={params.n}, eps={params.epsilon}: empty typical set"
        )
    return 3.0 * eps1 + margin


# ============================================================================
# SAMPLING
# ============================================================================


def sample_iid(p: JointPMF, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, n) array of i.i.d. flattened joint-symbol draws from ``p``."""
    pmf = p.mass.ravel()
    return rng.choice(pmf.size, size=(count, n), p=pmf)


def typical_fraction(
    p: JointPMF, params: TypicalityParams, samples: int, seed: int
) -> float:
    """Monte-Carlo estimate of P(X^n is strongly typical)."""
    if samples < 1:
        raise ArgumentError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    draws = sample_iid(p, params.n, samples, rng)
    return float(typical_mask(draws, p.mass, params.epsilon).mean())
