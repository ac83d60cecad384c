"""Canonical JSON, config hashing and atomic output writers.

Every data file corrbin emits goes through these helpers so that re-running a
config with the same seed produces byte-identical output: JSON is dumped with
sorted keys and fixed separators, floats are written with ``repr`` precision,
and nothing time-dependent is included.
"""

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from config import NON_SEMANTIC_FIELDS, TOOL_NAME, TOOL_VERSION


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and paths into JSON-native values.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``
    so the output stays strict JSON.
    """
    if hasattr(value, "tolist") and not isinstance(value, (str, bytes)):
        return to_jsonable(value.tolist())
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    return str(value)


def canonical_json(value: Any) -> str:
    """Serialize with sorted keys and compact separators."""
    return json.dumps(
        to_jsonable(value), sort_keys=True, separators=(",", ":"), allow_nan=False
    )


def config_hash(config: Mapping[str, Any]) -> str:
    """Hash the semantic part of an effective config (output locations excluded)."""
    semantic = {k: v for k, v in config.items() if k not in NON_SEMANTIC_FIELDS}
    digest = hashlib.sha256(canonical_json(semantic).encode("utf-8"))
    return digest.hexdigest()[:16]


def metadata_lines(cfg_hash: str, seed: Optional[int]) -> List[str]:
    """Header comment lines carried by every CSV data file."""
    return [
        f"# {TOOL_NAME} {TOOL_VERSION}",
        f"# config_hash: {cfg_hash}",
        f"# seed: {seed if seed is not None else 'none'}",
    ]


def metadata_block(cfg_hash: str, seed: Optional[int]) -> Dict[str, Any]:
    """The same metadata as a JSON object (JSON has no comment lines)."""
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "config_hash": cfg_hash,
        "seed": seed,
    }


def atomic_write_text(path: Path, text: str) -> None:
    """Write text atomically: temp file in the same directory, then os.replace().

    Readers only ever see the old file or the complete new one.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_fd, tmp_name = tempfile.mkstemp(
        dir=str(path.parent), prefix=f".{path.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(tmp_fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        # Never leave a stray temp file behind on failure.
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def atomic_write_json(path: Path, data: Any) -> None:
    """Write pretty, key-sorted JSON atomically."""
    text = json.dumps(to_jsonable(data), indent=2, sort_keys=True, allow_nan=False)
    atomic_write_text(path, text + "\n")


def format_cell(value: Any) -> str:
    """Render one CSV cell; floats use repr precision, None is empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if hasattr(value, "item"):
        return format_cell(value.item())
    return str(value)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    cfg_hash: str,
    seed: Optional[int],
) -> None:
    """Write a CSV data file with ``#`` metadata lines and a header row."""
    buffer = io.StringIO()
    for line in metadata_lines(cfg_hash, seed):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    atomic_write_text(path, buffer.getvalue())


def read_csv_rows(path: Path) -> List[Dict[str, str]]:
    """Read a corrbin CSV, skipping ``#`` metadata lines."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))
