#!/usr/bin/env python3
"""
corrbin - experiment harness for distributed source coding with correlated
messages.

Subcommands:
1. region      - minimum sum rate and corner points over a distortion sweep
2. simulate    - Monte-Carlo run of the random-binning scheme
3. graphcheck  - nearly semi-regular check of a message graph
4. duality     - forward/backward construction of the dual broadcast channel

Every subcommand reads one JSON config. Data files land under the --out
prefix (CSV for tables, JSON for reports) and carry the tool version, the
config hash and the master seed; run metrics go to the metrics directory.

Usage:
    python main.py region configs/region_dsbs.json --out data/region
    python main.py simulate configs/simulate_lossless.json --trials 200
    python main.py graphcheck configs/graphcheck_cycle.json
    python main.py duality configs/duality_dsbs.json --grid 64
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, cast

import numpy as np
from scipy import stats

# Add scripts directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from bigraph import (
    BipartiteGraph,
    EdgeSampler,
    SemiRegularParams,
    check_nearly_semi_regular,
    edge_marginals,
    rate_conditions,
)
from codec import CSV_COLUMNS, CodecConfig, estimate_degree_events, run_monte_carlo
from config import (
    DEFAULT_C1,
    DEFAULT_C2,
    DEFAULT_GRID,
    DEFAULT_MARKOV_K,
    DEFAULT_THETA,
    DUALITY_BLOCK_LENGTH,
    DUALITY_EPS_PRIME,
    ENV_FILE,
    EPS_PRIME_MARGIN,
    EXIT_CODES,
    GRAPH_MODES,
    MARKOV_EXACT_TOLERANCE,
    MARKOV_GRID_TOLERANCE,
    RECON_SEARCH_MODES,
    SUBCOMMANDS,
    TOOL_NAME,
    TOOL_VERSION,
    default_metrics_dir,
    default_workers,
    load_env_file,
    setup_logging,
)
from duality import run_duality
from errors import ArgumentError, ConfigurationError, CorrBinError, exit_code_for
from json_utils import atomic_write_json, config_hash, metadata_block, write_csv
from logging_utils import ErrorCollector, StructuredLogger, log_operation
from metrics_collector import MetricsCollector
from payload_types import (
    DistortionPayload,
    DualityConfig,
    DualityReportDict,
    GraphcheckConfig,
    GraphcheckReport,
    MetaBlock,
    RegionConfig,
    RegionReport,
    SimulateConfig,
    SimulateReport,
    SourcePayload,
)
from probcore import (
    CondPMF,
    JointPMF,
    bsc_channel,
    compose_markov,
    constant_channel,
    dsbs,
    hamming_distortion,
    identity_channel,
)
from region import (
    SolverParams,
    evaluate_channel,
    expected_distortion,
    lossless_corner_points,
    min_achievable_distortion,
    minimize_sum_rate,
    region_header,
    region_row,
    sum_rate_bounds,
    sweep_sum_rate,
)
from typicality import (
    TypicalityParams,
    cardinality_bounds_hold,
    cardinality_records,
    epsilon_prime_for,
)

logger = setup_logging("main")
slog = StructuredLogger("main")

Config = Dict[str, Any]

MODULE_LOGGERS = (
    "main",
    "probcore",
    "typicality",
    "bigraph",
    "codec",
    "region",
    "duality",
)

POINT_NAMES = ("A", "B", "C", "D")

CONFIG_TYPES: Dict[str, Any] = {
    "region": RegionConfig,
    "simulate": SimulateConfig,
    "graphcheck": GraphcheckConfig,
    "duality": DualityConfig,
}

TYPICAL_CSV_COLUMNS = (
    "n",
    "eps",
    "component",
    "size",
    "entropy",
    "rate",
    "deviation",
    "eps1",
    "bounds_hold",
)


# ============================================================================
# CONFIG LOADING AND VALIDATION
# ============================================================================


def load_config(path: Path) -> Config:
    """Read a JSON config file; missing files and bad JSON are config errors."""
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist", "config")
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}", "config") from None
    if not isinstance(payload, dict):
        raise ConfigurationError("top level must be a JSON object", "config")
    return payload


def _number(cfg: Config, name: str, default: Any = None, *, minimum: float = 0.0) -> Any:
    value = cfg.get(name, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"must be a number, got {value!r}", name)
    if not np.isfinite(value) or value < minimum:
        raise ConfigurationError(f"must be finite and >= {minimum:g}, got {value}", name)
    return value


def _integer(cfg: Config, name: str, default: Any = None, *, minimum: int = 1) -> Any:
    value = cfg.get(name, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"must be an integer, got {value!r}", name)
    if value < minimum:
        raise ConfigurationError(f"must be >= {minimum}, got {value}", name)
    return value


def _number_list(cfg: Config, name: str, length: Optional[int] = None) -> List[float]:
    values = cfg.get(name)
    if not isinstance(values, list) or not values:
        raise ConfigurationError("must be a non-empty list of numbers", name)
    if length is not None and len(values) != length:
        raise ConfigurationError(f"must have {length} entries, got {len(values)}", name)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ConfigurationError(f"entries must be finite numbers, got {v!r}", name)
    return [float(v) for v in values]


def _integer_list(cfg: Config, name: str) -> List[int]:
    values = _number_list(cfg, name)
    if any(not v.is_integer() or v < 1 for v in values):
        raise ConfigurationError("entries must be positive integers", name)
    return [int(v) for v in values]


def _choice(cfg: Config, name: str, options: Sequence[str], default: str) -> str:
    value = cfg.get(name, default)
    if value not in options:
        raise ConfigurationError(f"must be one of {tuple(options)}, got {value!r}", name)
    return value


def parse_source(payload: SourcePayload) -> JointPMF:
    """``{"dsbs": q}`` or an explicit two-axis ``{"axes", "mass"}`` PMF."""
    if isinstance(payload, dict) and "dsbs" in payload:
        q = _number(payload, "dsbs")
        if q > 1:
            raise ConfigurationError(f"crossover must lie in [0, 1], got {q}", "source")
        return dsbs(float(q))
    try:
        source = JointPMF.from_dict(payload)
    except ArgumentError as e:
        raise ConfigurationError(str(e), "source") from None
    if source.arity != 2:
        raise ConfigurationError("must be a joint PMF over (X1, X2)", "source")
    return source


def parse_distortion(payload: Optional[DistortionPayload], source: JointPMF) -> np.ndarray:
    """``"hamming"`` or an |X2| x |Xhat2| matrix of nonnegative entries."""
    k2 = source.shape[1]
    if payload is None or payload == "hamming":
        return hamming_distortion(k2)
    try:
        d = np.asarray(payload, dtype=float)
    except (TypeError, ValueError):
        raise ConfigurationError("must be 'hamming' or a numeric matrix", "distortion") from None
    if d.ndim != 2 or d.shape[0] != k2:
        raise ConfigurationError(
            f"matrix has shape {d.shape}, expected ({k2}, k)", "distortion"
        )
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ConfigurationError("entries must be finite and nonnegative", "distortion")
    return d


def parse_aux(
    payload: Any, source: JointPMF, d: np.ndarray, params: SolverParams
) -> Tuple[CondPMF, Optional[np.ndarray]]:
    """Test channel p(v|x2) and, for ``{"solve": ...}``, its reconstruction."""
    x2 = source.axes[1]
    if payload == "identity":
        return identity_channel(x2), None
    if payload == "constant":
        return constant_channel(x2), None
    if isinstance(payload, dict) and "bsc" in payload:
        try:
            return bsc_channel(float(_number(payload, "bsc")), x2), None
        except ArgumentError as e:
            raise ConfigurationError(str(e), "aux") from None
    if isinstance(payload, dict) and "solve" in payload:
        block = payload["solve"]
        if not isinstance(block, dict) or "D" not in block:
            raise ConfigurationError("'solve' needs a distortion budget 'D'", "aux")
        solution = minimize_sum_rate(source, d, float(_number(block, "D")), params)
        return solution.aux, solution.recon
    if isinstance(payload, dict) and "mass" in payload:
        try:
            aux = CondPMF.from_dict(payload)
        except ArgumentError as e:
            raise ConfigurationError(str(e), "aux") from None
        if aux.from_shape != (x2.size,):
            raise ConfigurationError("must be conditioned on X2 alone", "aux")
        return aux, None
    raise ConfigurationError(
        "must be 'identity', 'constant', {'bsc': e}, {'solve': {...}} or a CondPMF", "aux"
    )


def parse_recon(payload: Any, source: JointPMF, aux: CondPMF) -> np.ndarray:
    """``"v"``, ``"x1"`` or an explicit |X1| x |V| table of symbol indices."""
    k1 = source.shape[0]
    v_size = aux.to_shape[0]
    if payload == "v":
        return np.tile(np.arange(v_size, dtype=np.int64), (k1, 1))
    if payload == "x1":
        return np.repeat(np.arange(k1, dtype=np.int64)[:, None], v_size, axis=1)
    try:
        table = np.asarray(payload, dtype=np.int64)
    except (TypeError, ValueError):
        raise ConfigurationError("must be 'v', 'x1' or an integer table", "recon") from None
    if table.shape != (k1, v_size) or np.any(table < 0):
        raise ConfigurationError(
            f"table must have shape ({k1}, {v_size}) with nonnegative entries", "recon"
        )
    return table


def solver_params(cfg: Config) -> SolverParams:
    v_size = _integer(cfg, "v_size")
    return SolverParams(
        grid=_integer(cfg, "grid", DEFAULT_GRID),
        v_size=v_size,
        recon_search=_choice(cfg, "recon_search", RECON_SEARCH_MODES, "pointwise"),
        workers=cfg.get("workers"),
    )


def effective_config(
    cfg: Config, subcommand: str, args: argparse.Namespace
) -> Config:
    """Merge command-line overrides into the file config."""
    merged = dict(cfg)
    declared = merged.get("subcommand", subcommand)
    if declared != subcommand:
        raise ConfigurationError(
            f"config is for {declared!r}, invoked as {subcommand!r}", "subcommand"
        )
    merged["subcommand"] = subcommand
    known = CONFIG_TYPES[subcommand].__optional_keys__ | CONFIG_TYPES[subcommand].__required_keys__
    unknown = sorted(set(merged) - known)
    if unknown:
        logger.warning("Ignoring unknown %s config fields: %s", subcommand, ", ".join(unknown))
    overrides = {
        "seed": args.seed,
        "out": args.out,
        "grid": args.grid,
        "trials": args.trials,
        "alpha": args.alpha,
        "workers": args.workers,
    }
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    merged.setdefault("seed", 0)
    merged.setdefault("workers", default_workers())
    seed = merged["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigurationError("must be a 64-bit unsigned integer", "seed")
    if "out" not in merged:
        merged["out"] = str(Path("data") / subcommand)
    return merged


# ============================================================================
# RUNNER
# ============================================================================


class ExperimentRunner:
    """Runs one subcommand config and writes its data files."""

    def __init__(self, config: Config, metrics_dir: Optional[Path] = None) -> None:
        self.config = config
        self.subcommand: str = config["subcommand"]
        self.seed: int = int(config["seed"])
        self.out = Path(config["out"])
        self.cfg_hash = config_hash(config)
        self.metrics = MetricsCollector(
            Path(metrics_dir) if metrics_dir else default_metrics_dir()
        )
        self.errors = ErrorCollector()
        self.written: List[Path] = []

    def _run_step(self, step_name: str, step_fn: Callable[[], Any]) -> Any:
        with self.metrics.timed(step_name, subcommand=self.subcommand):
            return step_fn()

    def _path(self, suffix: str) -> Path:
        path = self.out.parent / f"{self.out.name}{suffix}"
        path.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(path)
        return path

    def _meta(self) -> MetaBlock:
        return cast(MetaBlock, metadata_block(self.cfg_hash, self.seed))

    def run(self) -> int:
        """Dispatch the subcommand; returns the exit code."""
        logger.info("=" * 60)
        logger.info("%s %s: %s", TOOL_NAME, TOOL_VERSION, self.subcommand)
        logger.info("config hash %s, seed %d", self.cfg_hash, self.seed)
        logger.info("=" * 60)

        slog.set_context(subcommand=self.subcommand, config_hash=self.cfg_hash)
        self.metrics.start_run(
            {"subcommand": self.subcommand, "config_hash": self.cfg_hash, "seed": self.seed}
        )
        handlers = {
            "region": self._region,
            "simulate": self._simulate,
            "graphcheck": self._graphcheck,
            "duality": self._duality,
        }
        try:
            with log_operation(slog, self.subcommand, seed=self.seed):
                handlers[self.subcommand]()
        except Exception as exc:
            code = exit_code_for(exc)
            self.metrics.finalize(success=False, error=str(exc), metadata={"exit_code": code})
            raise
        self.metrics.set_counter("files_written", len(self.written))
        self.metrics.finalize(success=True, metadata={"exit_code": EXIT_CODES["ok"]})
        for path in self.written:
            logger.info("Wrote %s", path)
        return EXIT_CODES["ok"]

    # ---- region -------------------------------------------------------------

    def _region(self) -> None:
        cfg = self.config
        source = parse_source(cfg.get("source"))
        d = parse_distortion(cfg.get("distortion"), source)
        params = solver_params(cfg)
        alpha = _number(cfg, "alpha")
        if "D_sweep" in cfg:
            budgets = _number_list(cfg, "D_sweep")
        elif "D" in cfg:
            budgets = [float(_number(cfg, "D"))]
        else:
            raise ConfigurationError("needs 'D' or 'D_sweep'", "D")

        solutions = self._run_step(
            "solve",
            lambda: sweep_sum_rate(source, d, budgets, params, alpha, self.errors),
        )
        self.metrics.set_counter("budgets", len(budgets))
        self.metrics.set_counter("budgets_failed", len(self.errors.get_errors()))

        ordered = sorted(solutions, key=lambda s: s.d_constraint)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.sum_rate > prev.sum_rate + params.tolerance:
                logger.warning(
                    "Sum rate increases from D=%g to D=%g (%.6f -> %.6f)",
                    prev.d_constraint,
                    cur.d_constraint,
                    prev.sum_rate,
                    cur.sum_rate,
                )

        def write() -> None:
            if solutions:
                write_csv(
                    self._path(".csv"),
                    region_header(solutions[0]),
                    [region_row(s) for s in solutions],
                    self.cfg_hash,
                    self.seed,
                )
            h_x1, h_x1x2 = sum_rate_bounds(source)
            report: RegionReport = {
                "meta": self._meta(),
                "lossless": lossless_corner_points(source),
                "min_distortion": min_achievable_distortion(source, d),
                "sum_rate_bounds": {"H_X1": h_x1, "H_X1X2": h_x1x2},
                "solutions": [s.to_dict() for s in solutions],
                "failures": self.errors.get_errors(),
            }
            atomic_write_json(self._path(".json"), report)

        self._run_step("write", write)
        if solutions:
            self.metrics.set_result("min_sum_rate", min(s.sum_rate for s in solutions))
        if self.errors.has_errors():
            self.errors.log_summary(slog)
            raise self.errors.first_exception()

    # ---- simulate -----------------------------------------------------------

    def _simulate(self) -> None:
        cfg = self.config
        source = parse_source(cfg.get("source"))
        d = parse_distortion(cfg.get("distortion"), source)
        trials = _integer(cfg, "trials", 100, minimum=0)
        if trials < 1:
            raise ConfigurationError(f"must be >= 1, got {trials}", "trials")
        aux, solved_recon = parse_aux(cfg.get("aux", "identity"), source, d, solver_params(cfg))
        if solved_recon is not None and "recon" not in cfg:
            recon = solved_recon
        else:
            recon = parse_recon(cfg.get("recon", "v"), source, aux)
        if "n_list" in cfg:
            n_values = _integer_list(cfg, "n_list")
        else:
            n_values = [_integer(cfg, "n", 8)]
        eps = float(_number(cfg, "eps", 0.2))
        markov_k = float(_number(cfg, "markov_k", DEFAULT_MARKOV_K))
        graph_mode = _choice(cfg, "graph_mode", GRAPH_MODES, "induce")
        degree_seeds = _integer(cfg, "degree_seeds", 0, minimum=0)

        solution = evaluate_channel(source, aux, recon, d, alpha=_number(cfg, "alpha"))
        joint = compose_markov(source, aux)
        if "rates" in cfg:
            rates = _number_list(cfg, "rates", 4)
            point = None
            margin = 0.0
        else:
            point = _choice(cfg, "point", POINT_NAMES, "D")
            margin = float(_number(cfg, "margin", 0.2))
            rates = []

        runs: List[Dict[str, Any]] = []
        rows: List[List[Any]] = []
        for n in n_values:
            eps_prime = self._eps_prime(cfg, joint, n, eps)
            if point is None:
                codec_cfg = CodecConfig(
                    n=n,
                    eps=eps,
                    eps_prime=eps_prime,
                    rates=tuple(rates),
                    markov_k=markov_k,
                    seed=self.seed,
                    graph_mode=graph_mode,
                )
            else:
                codec_cfg = CodecConfig.for_point(
                    solution.corner_points[point],
                    margin,
                    n=n,
                    eps=eps,
                    eps_prime=eps_prime,
                    markov_k=markov_k,
                    seed=self.seed,
                    graph_mode=graph_mode,
                )
            aggregate = self._run_step(
                f"monte_carlo_n{n}",
                lambda c=codec_cfg: run_monte_carlo(source, aux, recon, d, c, trials),
            )
            record = {"config": codec_cfg.to_dict(), **aggregate.to_dict()}
            if degree_seeds:
                seeds = [self.seed + k for k in range(degree_seeds)]
                estimate = self._run_step(
                    f"degree_events_n{n}",
                    lambda c=codec_cfg: estimate_degree_events(joint, c, seeds),
                )
                record["degree_events"] = estimate.to_dict()
            runs.append(record)
            rows.append(aggregate.to_row())
            self.metrics.increment_counter("trials", trials)
            self.metrics.set_result(f"decode_error_rate_n{n}", aggregate.decode_error_rate)
            rates = list(codec_cfg.rates)

        def write() -> None:
            write_csv(self._path(".csv"), CSV_COLUMNS, rows, self.cfg_hash, self.seed)
            report: SimulateReport = {
                "meta": self._meta(),
                "rates": rates,
                "point": point,
                "margin": margin,
                "expected_distortion": expected_distortion(source, aux, recon, d),
                "info": solution.info,
                "runs": runs,
            }
            atomic_write_json(self._path(".json"), report)

        self._run_step("write", write)

    def _eps_prime(self, cfg: Config, joint: JointPMF, n: int, eps: float) -> float:
        value = cfg.get("eps_prime", "auto")
        if value == "auto":
            # measured on the (X1, V) pair that indexes the message graph
            return epsilon_prime_for(
                joint.marginal((0, 2)),
                TypicalityParams(eps, n),
                EPS_PRIME_MARGIN,
                self.config.get("workers"),
            )
        return float(_number(cfg, "eps_prime"))

    # ---- graphcheck ---------------------------------------------------------

    def _graphcheck(self) -> None:
        cfg = self.config
        n1 = _integer(cfg, "n1")
        n2 = _integer(cfg, "n2")
        if n1 is None or n2 is None:
            raise ConfigurationError("vertex counts 'n1' and 'n2' are required", "n1")
        graph = self._run_step("load_graph", lambda: self._load_graph(cfg, n1, n2))
        values = _number_list(cfg, "params", 5)
        try:
            params = SemiRegularParams(
                int(values[0]), int(values[1]), values[2], values[3], values[4]
            )
        except ArgumentError as e:
            raise ConfigurationError(str(e), "params") from None

        report = self._run_step("check", lambda: check_nearly_semi_regular(graph, params))
        logger.info("nearly semi-regular: %s", "true" if report.ok else "false")
        payload: GraphcheckReport = {
            "meta": self._meta(),
            "nearly_semi_regular": report.ok,
            "violations": [v.describe() for v in report.violations],
            "summary": graph.summary(),
            "params": params.to_dict(),
        }
        if "rates" in cfg:
            n = _integer(cfg, "n")
            if n is None:
                raise ConfigurationError("rate conditions need a block length", "n")
            payload["rate_conditions"] = rate_conditions(
                params, n, _number_list(cfg, "rates", 4), float(_number(cfg, "eps", 0.0))
            )
        samples = _integer(cfg, "samples", 0, minimum=0)
        if samples:
            payload["sampling"] = self._run_step(
                "sample_edges", lambda: self._sample_edges(graph, samples)
            )

        typical_rows: List[List[Any]] = []
        if "typicality" in cfg:
            typical_rows = self._run_step(
                "typicality", lambda: self._typical_rows(cfg["typicality"])
            )

        def write() -> None:
            atomic_write_json(self._path(".json"), payload)
            if typical_rows:
                write_csv(
                    self._path(".typical.csv"),
                    TYPICAL_CSV_COLUMNS,
                    typical_rows,
                    self.cfg_hash,
                    self.seed,
                )

        self._run_step("write", write)
        self.metrics.set_result("nearly_semi_regular", report.ok)

    def _load_graph(self, cfg: Config, n1: int, n2: int) -> BipartiteGraph:
        if "edges_csv" in cfg:
            path = Path(cfg["edges_csv"])
            if not path.exists():
                raise ConfigurationError(f"edge file {path} does not exist", "edges_csv")
            return BipartiteGraph.from_csv(path, n1, n2)
        edges = cfg.get("edges")
        if not isinstance(edges, list):
            raise ConfigurationError("needs 'edges' or 'edges_csv'", "edges")
        try:
            return BipartiteGraph.from_edges(n1, n2, edges)
        except ArgumentError as e:
            raise ConfigurationError(str(e), "edges") from None

    def _sample_edges(self, graph: BipartiteGraph, samples: int) -> Dict[str, Any]:
        """Draw edges with the seeded sampler and test uniformity over E(G)."""
        draws = EdgeSampler(graph, self.seed).draw_many(samples)
        index = {tuple(e): k for k, e in enumerate(graph.edges.tolist())}
        counts = np.bincount(
            [index[tuple(e)] for e in draws.tolist()], minlength=graph.edge_count
        )
        result: Dict[str, Any] = {
            "draws": samples,
            "first": draws[: min(8, samples)].tolist(),
            "edge_count_min": int(counts.min()),
            "edge_count_max": int(counts.max()),
        }
        if graph.edge_count > 1:
            chi2, p_value = stats.chisquare(counts)
            result["chi2"] = float(chi2)
            result["p_value"] = float(p_value)
        p1, p2 = edge_marginals(graph)
        result["marginal1"] = p1.tolist()
        result["marginal2"] = p2.tolist()
        return result

    def _typical_rows(self, block: Any) -> List[List[Any]]:
        if not isinstance(block, dict):
            raise ConfigurationError("must be an object", "typicality")
        source = parse_source(block.get("source"))
        n_list = _integer_list(block, "n_list")
        eps_list = _number_list(block, "eps_list")
        rows: List[List[Any]] = []
        for n in n_list:
            for eps in eps_list:
                params = TypicalityParams(eps, n)
                records = cardinality_records(source, params, self.config.get("workers"))
                eps1 = max(r.deviation for r in records)
                for r in records:
                    rows.append(
                        [
                            n,
                            eps,
                            r.component,
                            r.size,
                            r.entropy,
                            r.rate,
                            r.deviation,
                            eps1,
                            cardinality_bounds_hold(r, eps1, n),
                        ]
                    )
        return rows

    # ---- duality ------------------------------------------------------------

    def _duality(self) -> None:
        cfg = self.config
        source = parse_source(cfg.get("source"))
        d = parse_distortion(cfg.get("distortion"), source)
        if "D" not in cfg:
            raise ConfigurationError("a distortion budget is required", "D")
        budget = float(_number(cfg, "D"))
        precondition = _choice(cfg, "precondition", ("exact", "grid"), "exact")
        tolerance = (
            MARKOV_EXACT_TOLERANCE if precondition == "exact" else MARKOV_GRID_TOLERANCE
        )
        perturb = None
        if "perturb" in cfg:
            block = cfg["perturb"]
            if not isinstance(block, dict) or "row" not in block or "amount" not in block:
                raise ConfigurationError("needs 'row' and 'amount'", "perturb")
            perturb = (_integer(block, "row", minimum=0), float(_number(block, "amount")))

        report = self._run_step(
            "duality",
            lambda: run_duality(
                source,
                d,
                budget,
                solver_params(cfg),
                c1=float(_number(cfg, "c1", DEFAULT_C1)),
                theta=float(_number(cfg, "theta", DEFAULT_THETA, minimum=-np.inf)),
                c2=float(_number(cfg, "c2", DEFAULT_C2)),
                precondition_tolerance=tolerance,
                n=_integer(cfg, "n", DUALITY_BLOCK_LENGTH),
                eps_prime=float(_number(cfg, "eps_prime", DUALITY_EPS_PRIME)),
                perturb=perturb,
            ),
        )
        logger.info(
            "BYP sum rate %.6f, SBC sum rate %.6f, gap %.6f (%s)",
            report.byp_sum_rate,
            report.sbc_sum_rate,
            report.gap,
            "ok" if report.gap_ok else "exceeds tolerance",
        )

        def write() -> None:
            body = cast(DualityReportDict, {"meta": self._meta(), **report.to_dict()})
            atomic_write_json(self._path(".json"), body)
            sbc = report.sbc
            if sbc is not None:
                x_labels = sbc.joint.axes[1].labels
                write_csv(
                    self._path(".csv"),
                    ["v", "p_v", *[f"p_{x}_given_v" for x in x_labels]],
                    [
                        [v, sbc.p_v[v], *sbc.p_x_given_v[v].tolist()]
                        for v in range(len(sbc.p_v))
                    ],
                    self.cfg_hash,
                    self.seed,
                )

        self._run_step("write", write)
        self.metrics.set_result("gap", report.gap)
        self.metrics.set_result("gap_ok", report.gap_ok)


# ============================================================================
# ENTRY POINT
# ============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Rate regions, random-binning simulations and broadcast-channel "
        "duality for distributed source coding with correlated messages",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    python main.py region configs/region_dsbs.json
    python main.py simulate configs/simulate_lossless.json --trials 500
    python main.py graphcheck configs/graphcheck_cycle.json --out data/cycle
    python main.py duality configs/duality_dsbs.json --grid 64

Exit codes:
    0 success, 1 unexpected error, 2 configuration error,
    3 infeasible budget or failed precondition, 4 capacity cap exceeded

Environment variables:
    CORRBIN_WORKERS   - default worker count for scans and enumeration
    CORRBIN_DATA_DIR  - base directory for run metrics
    DEBUG             - "true" enables debug logging
        """,
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Experiment to run")
    parser.add_argument("config", type=str, help="Path to the JSON config")
    parser.add_argument("--seed", type=int, help="Master seed (overrides the config)")
    parser.add_argument("--out", type=str, help="Output path prefix")
    parser.add_argument("--grid", type=int, help="Simplex grid resolution 1/g")
    parser.add_argument("--trials", type=int, help="Monte-Carlo trials per block length")
    parser.add_argument("--alpha", type=float, help="Split parameter for corner point B")
    parser.add_argument("--workers", type=int, help="Worker threads for scans")
    parser.add_argument(
        "--metrics-dir", type=str, help="Run metrics directory (default: data/metrics)"
    )
    parser.add_argument(
        "--log-level",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="Log level for every corrbin logger",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    return parser


def _apply_log_level(name: Optional[str]) -> None:
    if name is None:
        return
    level = getattr(logging, name)
    for logger_name in MODULE_LOGGERS:
        logging.getLogger(logger_name).setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point with argument parsing; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_log_level(args.log_level)

    # Load environment variables from .env if available
    if load_env_file(ENV_FILE):
        logger.info("Loaded environment from %s", ENV_FILE)

    try:
        config = effective_config(load_config(Path(args.config)), args.subcommand, args)
        runner = ExperimentRunner(config, Path(args.metrics_dir) if args.metrics_dir else None)
        return runner.run()
    except CorrBinError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exit_code_for(exc)
    except Exception:  # noqa: BLE001 - last-resort mapping to exit 1
        logger.exception("Unexpected failure")
        return EXIT_CODES["unexpected"]


if __name__ == "__main__":
    raise SystemExit(main())
