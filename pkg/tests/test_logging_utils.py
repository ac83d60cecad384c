#!/usr/bin/env python3
"""Tests for structured logging helpers and the sweep error collector."""

import logging

import pytest

from errors import InfeasibleError
from logging_utils import (
    ErrorCollector,
    StructuredLogger,
    log_operation,
    log_performance_metrics,
)


@pytest.fixture
def slog(caplog):
    caplog.set_level(logging.DEBUG, logger="corrbin_test")
    return StructuredLogger("corrbin_test", correlation_id="abc")


class TestStructuredLogger:
    def test_context_rendered_sorted(self, slog, caplog):
        slog.set_context(subcommand="region")
        slog.info("solved", extra={"sum_rate": 1.23456789})
        message = caplog.records[-1].getMessage()
        assert message == "solved [correlation_id=abc subcommand=region sum_rate=1.23457]"

    def test_fields_attached_to_record(self, slog, caplog):
        slog.warning("gap", extra={"gap": 0.5})
        assert caplog.records[-1].fields["gap"] == 0.5

    def test_clear_context(self, slog, caplog):
        slog.set_context(seed=1)
        slog.clear_context()
        slog.info("x")
        assert "seed" not in caplog.records[-1].getMessage()

    def test_disabled_level_is_skipped(self, caplog):
        caplog.set_level(logging.WARNING, logger="corrbin_quiet")
        StructuredLogger("corrbin_quiet").debug("hidden")
        assert not caplog.records


class TestLogOperation:
    def test_success_record(self, slog, caplog):
        with log_operation(slog, "grid_scan", grid=8) as op:
            op["cells"] = 10
        record = caplog.records[-1]
        assert record.fields["success"] is True
        assert record.fields["cells"] == 10
        assert "duration_ms" in record.fields

    def test_failure_reraises(self, slog, caplog):
        with pytest.raises(InfeasibleError):
            with log_operation(slog, "minimize_sum_rate", D=0.0):
                raise InfeasibleError("below floor", min_distortion=0.1)
        record = caplog.records[-1]
        assert record.levelno == logging.WARNING
        assert record.fields["error_type"] == "InfeasibleError"

    def test_performance_metrics(self, slog, caplog):
        log_performance_metrics(slog, {"operation": "run_monte_carlo", "trials": 5})
        assert caplog.records[-1].fields["metric_type"] == "performance"


class TestErrorCollector:
    def test_captures_and_continues(self):
        collector = ErrorCollector()
        done = []
        for d in (0.1, -1.0, 0.2):
            with collector.capture("minimize_sum_rate", D=d):
                if d < 0:
                    raise ValueError("negative budget")
                done.append(d)
        assert done == [0.1, 0.2]
        assert collector.has_errors()
        assert collector.get_errors()[0]["D"] == -1.0
        assert isinstance(collector.first_exception(), ValueError)

    def test_empty_collector(self):
        collector = ErrorCollector()
        assert not collector.has_errors()
        with pytest.raises(LookupError):
            collector.first_exception()

    def test_summary_and_clear(self, slog, caplog):
        collector = ErrorCollector()
        with collector.capture("op"):
            raise RuntimeError("x")
        collector.log_summary(slog)
        assert "1 errors occurred" in caplog.records[-2].getMessage()
        collector.clear()
        assert not collector.has_errors()
