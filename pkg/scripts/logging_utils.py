#!/usr/bin/env python3
"""
Structured logging helpers - contextual, correlated log records for long
numerical operations (enumerations, grid scans, Monte-Carlo runs).
"""

import logging
import time
import uuid
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional


def _render_fields(fields: Dict[str, Any]) -> str:
    """Render context fields as a stable ``key=value`` suffix."""
    parts = []
    for key in sorted(fields):
        value = fields[key]
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    return " ".join(parts)


class StructuredLogger:
    """
    Wrapper for a standard logger that appends structured context to messages.

    The context is also attached as ``extra`` so handlers that understand
    structured records can read the individual fields.

    Usage:
        logger = StructuredLogger("codec")
        logger.info("codebooks generated", extra={"c1": 4096, "c2": 512})
    """

    def __init__(self, name: str, correlation_id: Optional[str] = None):
        self.logger = logging.getLogger(name)
        self.correlation_id = correlation_id or uuid.uuid4().hex[:12]
        self.context: Dict[str, Any] = {}

    def _fields(self, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        combined = {"correlation_id": self.correlation_id, **self.context}
        if extra:
            combined.update(extra)
        return combined

    def set_context(self, **kwargs: Any) -> None:
        """Fields repeated on every later record (subcommand, config hash)."""
        self.context.update(kwargs)

    def clear_context(self) -> None:
        self.context.clear()

    def _log(
        self,
        level: int,
        msg: str,
        extra: Optional[Dict[str, Any]],
        exc_info: bool,
    ) -> None:
        if not self.logger.isEnabledFor(level):
            return
        fields = self._fields(extra)
        self.logger.log(
            level,
            "%s [%s]",
            msg,
            _render_fields(fields),
            extra={"fields": fields},
            exc_info=exc_info,
        )

    def debug(self, msg: str, extra: Optional[Dict[str, Any]] = None) -> None:
        self._log(logging.DEBUG, msg, extra, False)

    def info(self, msg: str, extra: Optional[Dict[str, Any]] = None) -> None:
        self._log(logging.INFO, msg, extra, False)

    def warning(self, msg: str, extra: Optional[Dict[str, Any]] = None) -> None:
        self._log(logging.WARNING, msg, extra, False)

    def error(
        self,
        msg: str,
        extra: Optional[Dict[str, Any]] = None,
        exc_info: bool = False,
    ) -> None:
        self._log(logging.ERROR, msg, extra, exc_info)


@contextmanager
def log_operation(
    logger: StructuredLogger, operation: str, **context: Any
) -> Iterator[Dict[str, Any]]:
    """Log start (debug), completion with duration_ms (info) or failure (warning).

    Keys the caller adds to the yielded dict land in the completion record:

        with log_operation(slog, "grid_scan", grid=32) as op:
            op["cells"] = scanned
    """
    start = time.perf_counter()
    metadata: Dict[str, Any] = {"operation": operation, **context}

    logger.debug(f"Starting operation: {operation}", extra=metadata)

    try:
        yield metadata
    except Exception as e:  # noqa: BLE001
        duration_ms = (time.perf_counter() - start) * 1000
        logger.warning(
            f"Failed operation: {operation}",
            extra={
                **metadata,
                "duration_ms": round(duration_ms, 2),
                "success": False,
                "error_type": type(e).__name__,
                "error_message": str(e),
            },
        )
        raise

    duration_ms = (time.perf_counter() - start) * 1000
    logger.info(
        f"Completed operation: {operation}",
        extra={**metadata, "duration_ms": round(duration_ms, 2), "success": True},
    )


def log_performance_metrics(
    logger: StructuredLogger, metrics: Dict[str, Any]
) -> None:
    """Throughput figures such as trials per second or grid cells per second."""
    logger.info("Performance metrics", extra={"metric_type": "performance", **metrics})


class ErrorCollector:
    """
    Collect per-point failures of a sweep so every failure is reported
    before the run exits.

    Usage:
        collector = ErrorCollector()
        for d in sweep:
            with collector.capture("minimize_sum_rate", D=d):
                ...
        if collector.has_errors():
            collector.log_summary(logger)
            raise collector.first_exception()
    """

    def __init__(self) -> None:
        self.errors: List[Dict[str, Any]] = []
        self._exceptions: List[Exception] = []

    @contextmanager
    def capture(self, operation: str, **context: Any) -> Iterator[None]:
        """Record a failure of this point and carry on with the sweep."""
        try:
            yield
        except Exception as e:  # noqa: BLE001
            self._exceptions.append(e)
            self.errors.append(
                {
                    "operation": operation,
                    "error_type": type(e).__name__,
                    "error_message": str(e),
                    **context,
                }
            )

    def has_errors(self) -> bool:
        return len(self.errors) > 0

    def get_errors(self) -> List[Dict[str, Any]]:
        return self.errors

    def first_exception(self) -> Exception:
        """Return the first captured exception (for exit-code mapping)."""
        if not self._exceptions:
            raise LookupError("no errors collected")
        return self._exceptions[0]

    def log_summary(self, logger: StructuredLogger) -> None:
        if not self.has_errors():
            return
        logger.warning(
            f"Error summary: {len(self.errors)} errors occurred",
            extra={"error_count": len(self.errors)},
        )
        for error in self.errors:
            logger.warning("  failed point", extra=error)

    def clear(self) -> None:
        self.errors.clear()
        self._exceptions.clear()
