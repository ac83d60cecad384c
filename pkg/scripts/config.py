#!/usr/bin/env python3
"""
Configuration settings for the corrbin toolkit.

Centralizes tolerances, enumeration caps, solver defaults and
environment-specific settings.
"""

import os
import logging
from pathlib import Path

# ============================================================================
# ENVIRONMENT
# ============================================================================

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
SCRIPTS_DIR = PROJECT_ROOT / "scripts"
ENV_FILE = PROJECT_ROOT / ".env"


def load_env_file(path: Path = ENV_FILE) -> bool:
    """Load a .env file into os.environ when python-dotenv is installed.

    Variables already set in the process environment keep their values.
    """
    try:
        from dotenv import load_dotenv
    except ImportError:
        return False
    if not path.exists():
        return False
    return bool(load_dotenv(path))


# Must run before any os.getenv below
load_env_file()

# Detect environment
ENV = os.getenv("ENVIRONMENT", "production")
DEBUG = ENV == "development" or os.getenv("DEBUG", "").lower() == "true"

TOOL_NAME = "corrbin"
TOOL_VERSION = "0.4.0"


def _env_int(name: str, default: int) -> int:
    """Read a positive integer override from the environment."""
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return value if value > 0 else default


def default_workers() -> int:
    """Worker threads for grid scans and typical-set enumeration."""
    return _env_int("CORRBIN_WORKERS", min(4, os.cpu_count() or 1))


def default_metrics_dir() -> Path:
    """Run metrics live under CORRBIN_DATA_DIR (default ./data)."""
    return Path(os.getenv("CORRBIN_DATA_DIR", str(PROJECT_ROOT / "data"))) / "metrics"


DEFAULT_WORKERS = default_workers()

# ============================================================================
# LOGGING
# ============================================================================

LOG_LEVEL = logging.DEBUG if DEBUG else logging.INFO
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# ============================================================================
# PROBABILITY TOLERANCES
# ============================================================================

PMF_SUM_TOLERANCE = 1e-12  # Accepted as-is below this deviation
PMF_RENORMALIZE_TOLERANCE = 1e-9  # Renormalized below this, rejected above
INFO_CLAMP_TOLERANCE = 1e-12  # Negative information within this clamps to 0
MARKOV_IDENTITY_TOLERANCE = 1e-10  # Chain-rule identities on composed joints

# ============================================================================
# TYPICALITY
# ============================================================================

TYPICALITY_SLACK = 1e-12  # Absolute slack on |N(a)/n - p(a)| <= eps*p(a)
ENUMERATION_CAP = 2**26  # Joint sequences scanned by exhaustive enumeration
ENUMERATION_CHUNK = 2**18  # Sequences per enumeration work unit
DEFAULT_MARKOV_K = 3.0  # eps_tilde = K * eps
EPS_PRIME_MARGIN = 0.05  # eps' = 3 * measured eps1 + margin

# ============================================================================
# BIPARTITE GRAPHS
# ============================================================================

SEMI_REGULAR_SLACK = 1e-9  # Relative slack for non-power-of-two bounds

# ============================================================================
# CODEC
# ============================================================================

EXACT_ENUMERATION_THRESHOLD = 2**22  # Scan size up to which codewords are drawn exactly
CODEBOOK_CAP = 2**22  # Max codewords per codebook
PAIR_SCAN_CAP = 2**26  # Max distinct (x1, v) sequence pairs tested for the graph
GRAPH_EDGE_CAP = 2**25  # Max induced edges (upper bound checked before building)
REJECTION_MAX_ROUNDS = 64  # Rejection-sampling batches before giving up
SEQUENCE_CODE_CAP = 2**62  # alphabet**n must stay below this for integer codes
PAIR_BLOCK_ELEMENTS = 2**24  # Elements per block in pairwise typicality scans
GRAPH_MODES = ("induce", "skip")

# Stream identifiers for SeedSequence spawn keys
SEED_STREAMS = {
    "codebook1": 1,
    "codebook2": 2,
    "bins1": 3,
    "bins2": 4,
    "trial": 5,
    "encoder": 6,
}

# ============================================================================
# REGION SOLVER
# ============================================================================

DEFAULT_GRID = 32  # Simplex grid resolution 1/g for each column of p(v|x2)
FEASIBILITY_TOLERANCE = 1e-9  # E d <= D + tol
GRID_CELL_CAP = 2**28  # Max aux-channel grid cells per scan
GRID_BLOCK_CELLS = 2**20  # Cells per parallel work unit
RECON_ENUMERATION_CAP = 2**16  # Max deterministic recon maps in exhaustive mode
SUM_RATE_EQUALITY_TOLERANCE = 1e-9  # R1 + R2' = R1' + R2
RECON_SEARCH_MODES = ("pointwise", "exhaustive")

# ============================================================================
# DUALITY
# ============================================================================

MARKOV_EXACT_TOLERANCE = 1e-8  # Grid-exact instances
MARKOV_GRID_TOLERANCE = 1e-3  # Grid-approximate instances
DUALITY_GAP_TOLERANCE = 0.03  # bits
DEFAULT_C1 = 1.0
DEFAULT_C2 = 1.0
DEFAULT_THETA = 0.0
SBC_MASS_FLOOR = 1e-7  # Mixture weights below this are dropped from the argmax
DUALITY_BLOCK_LENGTH = 8  # n for the reported graph-parameter tuple
DUALITY_EPS_PRIME = 0.1  # eps' for the reported mu = 2^{n eps'}
SBC_CANDIDATE_CAP = 2**20  # Max grid columns p(x|v) offered to the SBC program

# ============================================================================
# CLI
# ============================================================================

SUBCOMMANDS = ("region", "simulate", "graphcheck", "duality")

EXIT_CODES = {
    "ok": 0,
    "unexpected": 1,
    "config": 2,
    "infeasible": 3,
    "capacity": 4,
}

# Config fields that locate outputs and do not change results
NON_SEMANTIC_FIELDS = ("out", "metrics_dir", "workers", "log_level")


def setup_logging(name: str = "corrbin") -> logging.Logger:
    """Configure and return a logger instance."""
    logger = logging.getLogger(name)

    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT))
        logger.addHandler(handler)

    logger.setLevel(LOG_LEVEL)
    return logger
