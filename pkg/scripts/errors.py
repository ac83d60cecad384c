#!/usr/bin/env python3
"""Exception hierarchy shared by all corrbin modules and the CLI exit-code map."""

from __future__ import annotations

from typing import Optional

from config import EXIT_CODES


class CorrBinError(Exception):
    """Root of every error raised deliberately by corrbin."""


class ArgumentError(CorrBinError, ValueError):
    """A function received malformed arguments (axes, shapes, PMFs)."""


class ConfigurationError(CorrBinError, ValueError):
    """An experiment or codec configuration is invalid."""

    def __init__(self, message: str, field: Optional[str] = None) -> None:
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class InfeasibleError(CorrBinError):
    """A distortion or cost budget cannot be met."""

    def __init__(
        self,
        message: str,
        *,
        min_distortion: Optional[float] = None,
        min_cost: Optional[float] = None,
    ) -> None:
        super().__init__(message)
        self.min_distortion = min_distortion
        self.min_cost = min_cost


class CapacityError(CorrBinError):
    """An enumeration or memory cap would be exceeded."""

    def __init__(self, cap_name: str, cap: int, requested: float) -> None:
        super().__init__(
            f"{cap_name} exceeded: requested {requested:.6g}, cap {cap}"
        )
        self.cap_name = cap_name
        self.cap = cap
        self.requested = requested


class DecodeError(CorrBinError):
    """The joint decoder found no candidate pair or more than one."""

    NO_CANDIDATE = "NoCandidate"
    AMBIGUOUS = "Ambiguous"

    def __init__(self, kind: str, count: int = 0) -> None:
        label = kind if kind == self.NO_CANDIDATE else f"{kind}({count})"
        super().__init__(f"decoding failed: {label}")
        self.kind = kind
        self.count = count


class PreconditionError(CorrBinError):
    """A Markov precondition of the duality constructions does not hold."""

    def __init__(self, check: str, violation: float, tolerance: float) -> None:
        super().__init__(
            f"Markov precondition {check} violated: "
            f"max TV {violation:.3e} > {tolerance:.1e}"
        )
        self.check = check
        self.violation = violation
        self.tolerance = tolerance


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(exc, (ConfigurationError, ArgumentError)):
        return EXIT_CODES["config"]
    if isinstance(exc, (InfeasibleError, PreconditionError)):
        return EXIT_CODES["infeasible"]
    if isinstance(exc, CapacityError):
        return EXIT_CODES["capacity"]
    return EXIT_CODES["unexpected"]
