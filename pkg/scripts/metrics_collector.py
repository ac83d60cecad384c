#!/usr/bin/env python3
"""
Run metrics for corrbin invocations.

One record per CLI run is appended to `<metrics_dir>/YYYY-MM-DD.json`. The
record holds wall-clock timestamps and resource readings, so it lives apart
from the data files under --out, which must stay byte-identical across reruns.

Steps that repeat per block length (`monte_carlo_n8`, `monte_carlo_n12`, ...)
are also summed per family (`monte_carlo`) in `step_totals_ms`.
"""

from __future__ import annotations

import json
import re
import time
import uuid
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

from config import TOOL_NAME, TOOL_VERSION
from json_utils import atomic_write_json, to_jsonable

try:
    import psutil
except ImportError:  # pragma: no cover - optional dependency
    psutil = None  # type: ignore[assignment]

_BLOCK_SUFFIX = re.compile(r"_n\d+$")


@dataclass
class StepMetric:
    """Timing of one runner step (solve, monte_carlo_n16, write, ...)."""

    name: str
    duration_ms: float
    success: bool = True
    error: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def family(self) -> str:
        return _BLOCK_SUFFIX.sub("", self.name)


def _rss_mb() -> Optional[float]:
    if psutil is None:
        return None
    try:
        return round(psutil.Process().memory_info().rss / (1024 * 1024), 2)
    except Exception:  # noqa: BLE001
        return None


def _read_day(path: Path) -> List[Any]:
    """Existing records of a daily file; unreadable files start over."""
    if not path.exists():
        return []
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError, ValueError):
        return []
    return payload if isinstance(payload, list) else []


class MetricsCollector:
    """Step timings, counters and headline results of one run."""

    def __init__(self, metrics_dir: Path) -> None:
        self.metrics_dir = Path(metrics_dir)
        self._reset()

    def _reset(self) -> None:
        self.run_id: Optional[str] = None
        self.started_at: Optional[datetime] = None
        self.context: Dict[str, Any] = {}
        self.counters: Dict[str, Any] = {}
        self.results: Dict[str, Any] = {}
        self.steps: List[StepMetric] = []
        self.rss_start_mb: Optional[float] = None
        self.rss_peak_mb: Optional[float] = None

    def start_run(self, context: Optional[Dict[str, Any]] = None) -> str:
        """Begin a run keyed by subcommand, config hash and seed."""
        self._reset()
        self.run_id = uuid.uuid4().hex
        self.started_at = datetime.now(timezone.utc)
        self.context = dict(context or {})
        self.rss_start_mb = _rss_mb()
        self.rss_peak_mb = self.rss_start_mb
        return self.run_id

    def _sample_memory(self) -> None:
        rss = _rss_mb()
        if rss is not None and (self.rss_peak_mb is None or rss > self.rss_peak_mb):
            self.rss_peak_mb = rss

    def record_step(
        self,
        name: str,
        duration_ms: float,
        *,
        success: bool = True,
        error: Optional[str] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.steps.append(
            StepMetric(name, round(duration_ms, 2), success, error, dict(metadata or {}))
        )
        self._sample_memory()

    @contextmanager
    def timed(self, name: str, **metadata: Any) -> Iterator[None]:
        """Time the enclosed block as step ``name``; failures are recorded and re-raised."""
        start = time.perf_counter()
        try:
            yield
        except Exception as exc:
            self.record_step(
                name,
                (time.perf_counter() - start) * 1000,
                success=False,
                error=f"{type(exc).__name__}: {exc}",
                metadata=metadata,
            )
            raise
        self.record_step(name, (time.perf_counter() - start) * 1000, metadata=metadata)

    def set_counter(self, key: str, value: Any) -> None:
        self.counters[key] = value

    def increment_counter(self, key: str, amount: float = 1) -> None:
        current = self.counters.get(key, 0)
        self.counters[key] = (current if isinstance(current, (int, float)) else 0) + amount

    def set_result(self, key: str, value: Any) -> None:
        """Headline result: minimum sum rate, decode error rate, duality gap."""
        self.results[key] = value

    def step_totals(self) -> Dict[str, float]:
        totals: Dict[str, float] = {}
        for step in self.steps:
            totals[step.family] = round(totals.get(step.family, 0.0) + step.duration_ms, 2)
        return totals

    def finalize(
        self,
        *,
        success: bool,
        error: Optional[str] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> Path:
        """Append this run to the daily metrics file and return its path."""
        if not self.run_id or not self.started_at:
            self.start_run()
        assert self.started_at is not None
        finished_at = datetime.now(timezone.utc)
        self._sample_memory()

        record: Dict[str, Any] = {
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "run_id": self.run_id,
            "started_at": self.started_at.isoformat(),
            "finished_at": finished_at.isoformat(),
            "duration_ms": round((finished_at - self.started_at).total_seconds() * 1000, 2),
            "success": success,
            "error": error,
            "context": self.context,
            "counters": self.counters,
            "results": self.results,
            "memory_mb": {"start": self.rss_start_mb, "peak": self.rss_peak_mb},
            "steps": [asdict(step) for step in self.steps],
            "step_totals_ms": self.step_totals(),
            "metadata": dict(metadata or {}),
        }

        path = self.metrics_dir / f"{finished_at.strftime('%Y-%m-%d')}.json"
        runs = _read_day(path)
        runs.append(to_jsonable(record))
        atomic_write_json(path, runs)
        return path
