#!/usr/bin/env python3
"""
Probability core - finite-alphabet PMFs and the information measures used by
the region solver, the codec and the duality constructions.

All logarithms are base 2 (bits) and 0 log 0 is taken as 0. Joint PMFs are
immutable numpy arrays with one axis per random variable; axis subsets are
given as integer positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy.special import entr, rel_entr

from config import (
    INFO_CLAMP_TOLERANCE,
    PMF_RENORMALIZE_TOLERANCE,
    PMF_SUM_TOLERANCE,
    setup_logging,
)
from errors import ArgumentError

logger = setup_logging("probcore")

LN2 = math.log(2.0)

AxisSpec = Union[int, Sequence[int]]


# ============================================================================
# ALPHABETS
# ============================================================================


@dataclass(frozen=True)
class Alphabet:
    """Ordered list of distinct symbol labels."""

    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.labels)
        if not labels:
            raise ArgumentError("alphabet must contain at least one symbol")
        if len(set(labels)) != len(labels):
            raise ArgumentError(f"alphabet labels must be distinct: {list(labels)}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of_size(cls, size: int, prefix: str = "") -> "Alphabet":
        """Alphabet with labels prefix+"0" ... prefix+str(size-1)."""
        if size < 1:
            raise ArgumentError(f"alphabet size must be >= 1, got {size}")
        return cls(tuple(f"{prefix}{i}" for i in range(size)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ArgumentError(f"unknown symbol {label!r}") from None

    def __len__(self) -> int:
        return len(self.labels)


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def _normalize_total(mass: np.ndarray, what: str) -> np.ndarray:
    """Accept, renormalize or reject a mass array by its total."""
    total = float(mass.sum())
    deviation = abs(total - 1.0)
    if deviation <= PMF_SUM_TOLERANCE:
        return mass
    if deviation <= PMF_RENORMALIZE_TOLERANCE:
        logger.debug("Renormalizing %s (deviation %.3e)", what, deviation)
        return mass / total
    raise ArgumentError(f"{what} sums to {total!r}, not 1")


# ============================================================================
# JOINT AND CONDITIONAL PMFS
# ============================================================================


@dataclass(frozen=True, eq=False)
class JointPMF:
    """Joint PMF over the product of ``axes``; ``mass[i, j, ...]`` is p(i, j, ...)."""

    axes: Tuple[Alphabet, ...]
    mass: np.ndarray

    def __post_init__(self) -> None:
        axes = tuple(self.axes)
        mass = np.asarray(self.mass, dtype=float)
        if not axes:
            raise ArgumentError("joint PMF needs at least one axis")
        if mass.shape != tuple(a.size for a in axes):
            raise ArgumentError(
                f"mass shape {mass.shape} does not match axes "
                f"{tuple(a.size for a in axes)}"
            )
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ArgumentError("PMF entries must be finite and nonnegative")
        mass = _normalize_total(mass, "joint PMF")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "mass", _freeze(mass))

    # ---- constructors -------------------------------------------------------

    @classmethod
    def from_array(
        cls, mass: Any, labels: Optional[Sequence[Sequence[str]]] = None
    ) -> "JointPMF":
        """Build from a nested list/array, defaulting to labels "0", "1", ..."""
        array = np.asarray(mass, dtype=float)
        if labels is None:
            axes = tuple(Alphabet.of_size(k) for k in array.shape)
        else:
            axes = tuple(Alphabet(tuple(lbls)) for lbls in labels)
        return cls(axes, array)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "JointPMF":
        """Parse ``{"axes": [[labels], ...], "mass": nested lists}``."""
        if not isinstance(payload, dict) or "axes" not in payload or "mass" not in payload:
            raise ArgumentError("PMF payload needs 'axes' and 'mass'")
        return cls.from_array(payload["mass"], payload["axes"])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "axes": [list(a.labels) for a in self.axes],
            "mass": self.mass.tolist(),
        }

    # ---- accessors ----------------------------------------------------------

    @property
    def arity(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.mass.shape)

    def marginal(self, axes: AxisSpec) -> "JointPMF":
        """Marginal over ``axes``, returned with its axes in the requested order."""
        keep = _axis_tuple(self, axes)
        drop = tuple(i for i in range(self.arity) if i not in keep)
        summed = self.mass.sum(axis=drop) if drop else self.mass
        remaining = [i for i in range(self.arity) if i in keep]
        order = [remaining.index(i) for i in keep]
        return JointPMF(tuple(self.axes[i] for i in keep), np.transpose(summed, order))

    def __repr__(self) -> str:
        sizes = "x".join(str(a.size) for a in self.axes)
        return f"JointPMF({sizes})"


@dataclass(frozen=True, eq=False)
class CondPMF:
    """Conditional PMF p(to | from); ``mass`` has shape from_shape + to_shape.

    Every conditioning row must sum to one. Rows of conditioning values that
    carry no mass in the joint of interest are filled by the constructor that
    produced them (see ``from_joint``).
    """

    from_axes: Tuple[Alphabet, ...]
    to_axes: Tuple[Alphabet, ...]
    mass: np.ndarray

    def __post_init__(self) -> None:
        from_axes = tuple(self.from_axes)
        to_axes = tuple(self.to_axes)
        mass = np.asarray(self.mass, dtype=float)
        expected = tuple(a.size for a in from_axes) + tuple(a.size for a in to_axes)
        if not from_axes or not to_axes:
            raise ArgumentError("conditional PMF needs conditioning and target axes")
        if mass.shape != expected:
            raise ArgumentError(f"mass shape {mass.shape} does not match {expected}")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ArgumentError("conditional PMF entries must be finite and nonnegative")
        rows = mass.reshape(-1, int(np.prod([a.size for a in to_axes])))
        sums = rows.sum(axis=1)
        deviation = np.abs(sums - 1.0)
        if np.any(deviation > PMF_RENORMALIZE_TOLERANCE):
            bad = int(np.argmax(deviation))
            raise ArgumentError(f"conditional row {bad} sums to {sums[bad]!r}, not 1")
        if np.any(deviation > PMF_SUM_TOLERANCE):
            rows = rows / sums[:, None]
            mass = rows.reshape(expected)
        object.__setattr__(self, "from_axes", from_axes)
        object.__setattr__(self, "to_axes", to_axes)
        object.__setattr__(self, "mass", _freeze(mass))

    @property
    def from_shape(self) -> Tuple[int, ...]:
        return tuple(a.size for a in self.from_axes)

    @property
    def to_shape(self) -> Tuple[int, ...]:
        return tuple(a.size for a in self.to_axes)

    def rows(self) -> np.ndarray:
        """2-D view: one row per conditioning value (row-major)."""
        return self.mass.reshape(int(np.prod(self.from_shape)), -1)

    @classmethod
    def from_array(
        cls,
        mass: Any,
        n_from: int = 1,
        labels: Optional[Sequence[Sequence[str]]] = None,
    ) -> "CondPMF":
        array = np.asarray(mass, dtype=float)
        if labels is None:
            axes = [Alphabet.of_size(k) for k in array.shape]
        else:
            axes = [Alphabet(tuple(lbls)) for lbls in labels]
        return cls(tuple(axes[:n_from]), tuple(axes[n_from:]), array)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "CondPMF":
        """Parse ``{"from_axes": [...], "to_axes": [...], "mass": nested}``."""
        try:
            from_labels = payload["from_axes"]
            to_labels = payload["to_axes"]
            mass = payload["mass"]
        except (KeyError, TypeError):
            raise ArgumentError(
                "conditional PMF payload needs 'from_axes', 'to_axes' and 'mass'"
            ) from None
        return cls(
            tuple(Alphabet(tuple(lbls)) for lbls in from_labels),
            tuple(Alphabet(tuple(lbls)) for lbls in to_labels),
            np.asarray(mass, dtype=float),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "from_axes": [list(a.labels) for a in self.from_axes],
            "to_axes": [list(a.labels) for a in self.to_axes],
            "mass": self.mass.tolist(),
        }

    @classmethod
    def from_joint(cls, joint: JointPMF, given: AxisSpec, target: AxisSpec) -> "CondPMF":
        """p(target | given) from a joint; zero-mass rows are set uniform."""
        given_t = _axis_tuple(joint, given)
        target_t = _axis_tuple(joint, target)
        _require_disjoint(given_t, target_t)
        sub = joint.marginal(given_t + target_t).mass
        n_given = int(np.prod([joint.axes[i].size for i in given_t]))
        rows = sub.reshape(n_given, -1)
        totals = rows.sum(axis=1, keepdims=True)
        uniform = np.full_like(rows, 1.0 / rows.shape[1])
        cond = np.divide(rows, totals, out=uniform, where=totals > 0)
        return cls(
            tuple(joint.axes[i] for i in given_t),
            tuple(joint.axes[i] for i in target_t),
            cond.reshape(sub.shape),
        )

    def __repr__(self) -> str:
        return f"CondPMF({self.from_shape} -> {self.to_shape})"


# ============================================================================
# AXIS HELPERS
# ============================================================================


def _axis_tuple(p: JointPMF, axes: AxisSpec) -> Tuple[int, ...]:
    if isinstance(axes, (int, np.integer)):
        axes = (int(axes),)
    result = tuple(int(a) for a in axes)
    for a in result:
        if a < 0 or a >= p.arity:
            raise ArgumentError(f"axis {a} out of range for arity {p.arity}")
    if len(set(result)) != len(result):
        raise ArgumentError(f"repeated axis in {list(result)}")
    return result


def _require_disjoint(*groups: Iterable[int]) -> None:
    seen: set = set()
    for group in groups:
        for a in group:
            if a in seen:
                raise ArgumentError(f"axis subsets overlap on axis {a}")
            seen.add(a)


def _clamp_information(value: float, what: str) -> float:
    if value >= 0:
        return value
    if value >= -INFO_CLAMP_TOLERANCE:
        return 0.0
    logger.warning("%s is negative beyond tolerance: %.3e", what, value)
    return value


# ============================================================================
# INFORMATION MEASURES
# ============================================================================


def entropy_of(mass: np.ndarray) -> float:
    """Entropy in bits of a (flattened) mass array."""
    return float(np.sum(entr(np.asarray(mass, dtype=float)))) / LN2


def entropy(p: JointPMF, axes: AxisSpec) -> float:
    """H of the marginal on ``axes``."""
    axes_t = _axis_tuple(p, axes)
    if not axes_t:
        raise ArgumentError("entropy needs a nonempty axis subset")
    return entropy_of(p.marginal(axes_t).mass)


def conditional_entropy(p: JointPMF, target: AxisSpec, given: AxisSpec) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    target_t = _axis_tuple(p, target)
    given_t = _axis_tuple(p, given)
    if not target_t:
        raise ArgumentError("conditional entropy needs a nonempty target")
    _require_disjoint(target_t, given_t)
    if not given_t:
        return entropy(p, target_t)
    value = entropy(p, target_t + given_t) - entropy(p, given_t)
    return _clamp_information(value, "conditional entropy")


def mutual_information(p: JointPMF, a: AxisSpec, b: AxisSpec) -> float:
    """I(a; b) = H(a) + H(b) - H(a, b)."""
    a_t = _axis_tuple(p, a)
    b_t = _axis_tuple(p, b)
    if not a_t or not b_t:
        raise ArgumentError("mutual information needs nonempty axis subsets")
    _require_disjoint(a_t, b_t)
    value = entropy(p, a_t) + entropy(p, b_t) - entropy(p, a_t + b_t)
    return _clamp_information(value, "mutual information")


def conditional_mutual_information(
    p: JointPMF, a: AxisSpec, b: AxisSpec, given: AxisSpec
) -> float:
    """I(a; b | given) = H(a | given) - H(a | b, given)."""
    a_t = _axis_tuple(p, a)
    b_t = _axis_tuple(p, b)
    given_t = _axis_tuple(p, given)
    if not a_t or not b_t:
        raise ArgumentError("conditional mutual information needs nonempty subsets")
    _require_disjoint(a_t, b_t, given_t)
    if not given_t:
        return mutual_information(p, a_t, b_t)
    value = conditional_entropy(p, a_t, given_t) - conditional_entropy(
        p, a_t, b_t + given_t
    )
    return _clamp_information(value, "conditional mutual information")


def relative_entropy(
    p: Union[JointPMF, np.ndarray, Sequence[float]],
    q: Union[JointPMF, np.ndarray, Sequence[float]],
) -> float:
    """D(p || q) in bits; ``math.inf`` when p is not absolutely continuous wrt q."""
    p_mass = p.mass if isinstance(p, JointPMF) else np.asarray(p, dtype=float)
    q_mass = q.mass if isinstance(q, JointPMF) else np.asarray(q, dtype=float)
    if p_mass.shape != q_mass.shape:
        raise ArgumentError(
            f"relative entropy shape mismatch: {p_mass.shape} vs {q_mass.shape}"
        )
    if np.any((p_mass > 0) & (q_mass <= 0)):
        return math.inf
    value = float(np.sum(rel_entr(p_mass, q_mass))) / LN2
    return max(value, 0.0) if value > -INFO_CLAMP_TOLERANCE else value


# ============================================================================
# COMPOSITION AND STRUCTURE CHECKS
# ============================================================================


def compose_markov(source: JointPMF, aux: CondPMF) -> JointPMF:
    """p(x1, x2, v) = p(x1, x2) p(v | x2), i.e. X1 -> X2 -> V."""
    if source.arity != 2:
        raise ArgumentError("source must be a two-axis joint over (X1, X2)")
    if len(aux.from_axes) != 1 or len(aux.to_axes) != 1:
        raise ArgumentError("auxiliary channel must map one axis to one axis")
    if aux.from_axes[0] != source.axes[1]:
        raise ArgumentError(
            "auxiliary channel must condition on the X2 alphabet "
            f"{list(source.axes[1].labels)}, got {list(aux.from_axes[0].labels)}"
        )
    mass = np.einsum("ab,bv->abv", source.mass, aux.mass)
    return JointPMF((source.axes[0], source.axes[1], aux.to_axes[0]), mass)


def check_no_common_part(p: JointPMF) -> bool:
    """True iff the support graph of p(x1, x2) is connected on its active symbols."""
    if p.arity != 2:
        raise ArgumentError("common-part check needs a two-axis joint")
    support = p.mass > 0
    graph = nx.Graph()
    graph.add_nodes_from(("x1", int(i)) for i in np.flatnonzero(support.any(axis=1)))
    graph.add_nodes_from(("x2", int(j)) for j in np.flatnonzero(support.any(axis=0)))
    graph.add_edges_from(
        (("x1", int(i)), ("x2", int(j))) for i, j in zip(*np.nonzero(support))
    )
    return nx.is_connected(graph)


def markov_violation(
    p: JointPMF, first: AxisSpec, middle: AxisSpec, last: AxisSpec
) -> float:
    """Max total-variation distance between p(last | first, middle) and p(last | middle).

    The maximum runs over (first, middle) cells with positive mass. Zero iff
    first -> middle -> last is a Markov chain.
    """
    f_t = _axis_tuple(p, first)
    m_t = _axis_tuple(p, middle)
    l_t = _axis_tuple(p, last)
    _require_disjoint(f_t, m_t, l_t)
    if not f_t or not l_t:
        raise ArgumentError("Markov check needs nonempty first and last subsets")

    sizes = [int(np.prod([p.axes[i].size for i in group])) for group in (f_t, m_t, l_t)]
    cube = p.marginal(f_t + m_t + l_t).mass.reshape(sizes)
    fm_mass = cube.sum(axis=2)
    m_cube = cube.sum(axis=0)
    m_mass = m_cube.sum(axis=1)

    cond_fm = np.divide(
        cube, fm_mass[:, :, None], out=np.zeros_like(cube), where=fm_mass[:, :, None] > 0
    )
    cond_m = np.divide(
        m_cube, m_mass[:, None], out=np.zeros_like(m_cube), where=m_mass[:, None] > 0
    )
    tv = 0.5 * np.abs(cond_fm - cond_m[None, :, :]).sum(axis=2)
    active = fm_mass > 0
    return float(tv[active].max()) if np.any(active) else 0.0


# ============================================================================
# CANONICAL CONSTRUCTORS
# ============================================================================


def binary_entropy(q: float) -> float:
    """h(q) in bits."""
    if not 0.0 <= q <= 1.0:
        raise ArgumentError(f"binary entropy needs q in [0, 1], got {q}")
    return entropy_of(np.array([q, 1.0 - q]))


def dsbs(q: float) -> JointPMF:
    """Doubly symmetric binary source: X1 ~ Bern(1/2), X2 = X1 xor Bern(q)."""
    if not 0.0 <= q <= 1.0:
        raise ArgumentError(f"crossover must lie in [0, 1], got {q}")
    return JointPMF.from_array([[(1 - q) / 2, q / 2], [q / 2, (1 - q) / 2]])


def bsc_channel(eps: float, alphabet: Optional[Alphabet] = None) -> CondPMF:
    """Binary symmetric channel from ``alphabet`` (default {0,1}) to {0,1}."""
    if not 0.0 <= eps <= 1.0:
        raise ArgumentError(f"crossover must lie in [0, 1], got {eps}")
    source_alphabet = alphabet or Alphabet.of_size(2)
    if source_alphabet.size != 2:
        raise ArgumentError("binary symmetric channel needs a binary input alphabet")
    return CondPMF(
        (source_alphabet,),
        (Alphabet.of_size(2),),
        np.array([[1 - eps, eps], [eps, 1 - eps]]),
    )


def identity_channel(alphabet: Alphabet) -> CondPMF:
    """V = X: identity map onto a copy of ``alphabet``."""
    return CondPMF((alphabet,), (Alphabet(alphabet.labels),), np.eye(alphabet.size))


def constant_channel(
    alphabet: Alphabet, to_alphabet: Optional[Alphabet] = None, symbol: int = 0
) -> CondPMF:
    """V constant: every input maps to ``symbol`` of ``to_alphabet``."""
    target = to_alphabet or Alphabet.of_size(1)
    if not 0 <= symbol < target.size:
        raise ArgumentError(f"symbol {symbol} out of range for target alphabet")
    mass = np.zeros((alphabet.size, target.size))
    mass[:, symbol] = 1.0
    return CondPMF((alphabet,), (target,), mass)


def hamming_distortion(k: int) -> np.ndarray:
    """k x k Hamming distortion matrix."""
    if k < 1:
        raise ArgumentError(f"alphabet size must be >= 1, got {k}")
    return 1.0 - np.eye(k)


def information_summary(joint: JointPMF) -> Dict[str, float]:
    """Named entropies and informations of a composed (X1, X2, V) joint."""
    if joint.arity != 3:
        raise ArgumentError("summary needs a three-axis (X1, X2, V) joint")
    return {
        "H_X1": entropy(joint, 0),
        "H_X2": entropy(joint, 1),
        "H_X1X2": entropy(joint, (0, 1)),
        "I_VX2": mutual_information(joint, 2, 1),
        "I_X1V": mutual_information(joint, 0, 2),
        "I_VX2_given_X1": conditional_mutual_information(joint, 2, 1, 0),
        "H_X1_given_V": conditional_entropy(joint, 0, 2),
    }
