"""Shared TypedDict schemas for the JSON payloads read and written by the CLI.

Config payloads mirror `schemas/*.json`; report payloads mirror the
`to_dict()` output of the result dataclasses (`RegionSolution`,
`TrialAggregate`, `SemiRegularReport`, `DualityReport`). Modules build the
dataclasses and hand plain dicts to `json_utils` afterwards.

`total=False` because most fields are optional and defaulted by `main.py`.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, TypedDict, Union


class PMFPayload(TypedDict, total=False):
    """Explicit joint PMF: one label list per axis and nested masses."""

    axes: List[List[str]]
    mass: list


class DsbsPayload(TypedDict):
    """Doubly symmetric binary source with crossover ``dsbs``."""

    dsbs: float


SourcePayload = Union[PMFPayload, DsbsPayload]
DistortionPayload = Union[str, List[List[float]]]  # "hamming" or a matrix


class CondPMFPayload(TypedDict, total=False):
    from_axes: List[List[str]]
    to_axes: List[List[str]]
    mass: list


class BaseConfig(TypedDict, total=False):
    """Fields shared by every subcommand config."""

    subcommand: str  # "region" | "simulate" | "graphcheck" | "duality"
    seed: int
    out: str  # output path prefix
    workers: int
    metrics_dir: str
    log_level: str


class RegionConfig(BaseConfig, total=False):
    source: SourcePayload
    distortion: DistortionPayload
    D: float
    D_sweep: List[float]
    grid: int
    v_size: Optional[int]
    recon_search: str  # "pointwise" | "exhaustive"
    alpha: Optional[float]


class SimulateConfig(BaseConfig, total=False):
    source: SourcePayload
    distortion: DistortionPayload
    aux: Union[str, Dict[str, float], CondPMFPayload]
    recon: Union[str, List[List[int]]]  # "v", "x1" or an |X1| x |V| table
    n: int
    n_list: List[int]
    eps: float
    eps_prime: Union[float, str]  # number or "auto"
    markov_k: float
    trials: int
    graph_mode: str  # "induce" | "skip"
    rates: List[float]
    point: str  # "A" | "B" | "C" | "D"
    margin: float
    alpha: Optional[float]
    degree_seeds: int  # codebook realisations for the E1/E2 estimate
    grid: int  # solver grid for {"solve": ...} aux
    v_size: Optional[int]
    recon_search: str


class TypicalityBlock(TypedDict, total=False):
    source: SourcePayload
    n_list: List[int]
    eps_list: List[float]


class GraphcheckConfig(BaseConfig, total=False):
    n1: int
    n2: int
    edges: List[List[int]]
    edges_csv: str
    params: List[float]  # (Delta1, Delta2, Delta1', Delta2', mu)
    samples: int
    rates: List[float]
    n: int
    eps: float
    typicality: TypicalityBlock


class PerturbBlock(TypedDict):
    row: int
    amount: float


class DualityConfig(BaseConfig, total=False):
    source: SourcePayload
    distortion: DistortionPayload
    D: float
    grid: int
    v_size: Optional[int]
    recon_search: str
    c1: float
    c2: float
    theta: float
    precondition: str  # "exact" | "grid"
    n: int
    eps_prime: float
    perturb: PerturbBlock


class MetaBlock(TypedDict):
    """Metadata carried by every JSON data file."""

    tool: str
    version: str
    config_hash: str
    seed: Optional[int]


class RegionReport(TypedDict, total=False):
    meta: MetaBlock
    lossless: Dict[str, float]
    min_distortion: float
    sum_rate_bounds: Dict[str, float]
    solutions: List[dict]
    failures: List[Dict[str, Any]]


class SimulateReport(TypedDict, total=False):
    meta: MetaBlock
    rates: List[float]
    point: Optional[str]
    margin: float
    expected_distortion: float
    info: Dict[str, float]
    runs: List[dict]


class GraphcheckReport(TypedDict, total=False):
    meta: MetaBlock
    nearly_semi_regular: bool
    violations: List[str]
    summary: Dict[str, int]
    params: Dict[str, float]
    rate_conditions: Dict[str, dict]
    sampling: Dict[str, Any]


class DualityReportDict(TypedDict, total=False):
    meta: MetaBlock
    byp_sum_rate: float
    sbc_sum_rate: float
    gap: float
    gap_ok: bool
    correlation_match: bool
    markov_checks: List[dict]
    reverse: Optional[dict]
