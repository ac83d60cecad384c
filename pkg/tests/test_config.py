#!/usr/bin/env python3
"""Tests for configuration module."""

import logging
import os


class TestConfig:
    """Tests for config.py settings and utilities."""

    def test_config_imports(self):
        """Test that tolerances and caps can be imported."""
        from config import (
            DEFAULT_GRID,
            DEFAULT_MARKOV_K,
            ENUMERATION_CAP,
            FEASIBILITY_TOLERANCE,
            PMF_RENORMALIZE_TOLERANCE,
            PMF_SUM_TOLERANCE,
        )

        assert DEFAULT_GRID > 0
        assert DEFAULT_MARKOV_K == 3.0
        assert ENUMERATION_CAP == 2**26
        assert 0 < PMF_SUM_TOLERANCE < PMF_RENORMALIZE_TOLERANCE
        assert FEASIBILITY_TOLERANCE > 0

    def test_exit_codes(self):
        """Test that the CLI exit-code table is complete and distinct."""
        from config import EXIT_CODES

        assert EXIT_CODES == {
            "ok": 0,
            "unexpected": 1,
            "config": 2,
            "infeasible": 3,
            "capacity": 4,
        }

    def test_seed_streams_distinct(self):
        from config import SEED_STREAMS

        assert len(set(SEED_STREAMS.values())) == len(SEED_STREAMS)

    def test_markov_tolerances_ordered(self):
        from config import MARKOV_EXACT_TOLERANCE, MARKOV_GRID_TOLERANCE

        assert MARKOV_EXACT_TOLERANCE < MARKOV_GRID_TOLERANCE

    def test_non_semantic_fields(self):
        from config import NON_SEMANTIC_FIELDS

        assert "out" in NON_SEMANTIC_FIELDS
        assert "seed" not in NON_SEMANTIC_FIELDS

    def test_paths_exist(self):
        """Test that project paths are valid."""
        from config import PROJECT_ROOT, SCRIPTS_DIR

        assert PROJECT_ROOT.exists()
        assert SCRIPTS_DIR.exists()

    def test_workers_env_override(self, monkeypatch):
        from config import _env_int

        monkeypatch.setenv("CORRBIN_TEST_INT", "6")
        assert _env_int("CORRBIN_TEST_INT", 2) == 6
        monkeypatch.setenv("CORRBIN_TEST_INT", "zero")
        assert _env_int("CORRBIN_TEST_INT", 2) == 2
        monkeypatch.setenv("CORRBIN_TEST_INT", "-3")
        assert _env_int("CORRBIN_TEST_INT", 2) == 2

    def test_setup_logging(self):
        """Test logger setup function."""
        from config import setup_logging

        logger = setup_logging("test_logger")

        assert isinstance(logger, logging.Logger)
        assert logger.name == "test_logger"
        assert len(logger.handlers) > 0

    def test_setup_logging_idempotent(self):
        """Test that setup_logging doesn't duplicate handlers."""
        from config import setup_logging

        logger1 = setup_logging("idempotent_test")
        handler_count1 = len(logger1.handlers)

        logger2 = setup_logging("idempotent_test")
        handler_count2 = len(logger2.handlers)

        assert handler_count1 == handler_count2


class TestEnvFile:
    """The .env file feeds the lazily read defaults."""

    def test_env_file_sets_default_workers(self, temp_dir, mocker):
        from config import default_workers, load_env_file

        env_file = temp_dir / ".env"
        env_file.write_text("CORRBIN_WORKERS=3\n", encoding="utf-8")
        mocker.patch.dict("os.environ")
        os.environ.pop("CORRBIN_WORKERS", None)

        assert load_env_file(env_file)
        assert default_workers() == 3

    def test_process_environment_wins(self, temp_dir, mocker):
        from config import default_workers, load_env_file

        env_file = temp_dir / ".env"
        env_file.write_text("CORRBIN_WORKERS=3\n", encoding="utf-8")
        mocker.patch.dict("os.environ", {"CORRBIN_WORKERS": "5"})

        load_env_file(env_file)
        assert default_workers() == 5

    def test_env_file_sets_metrics_dir(self, temp_dir, mocker):
        from config import default_metrics_dir, load_env_file

        env_file = temp_dir / ".env"
        env_file.write_text(f"CORRBIN_DATA_DIR={temp_dir / 'runs'}\n", encoding="utf-8")
        mocker.patch.dict("os.environ")
        os.environ.pop("CORRBIN_DATA_DIR", None)

        load_env_file(env_file)
        assert default_metrics_dir() == temp_dir / "runs" / "metrics"

    def test_missing_file(self, temp_dir):
        from config import load_env_file

        assert load_env_file(temp_dir / "absent.env") is False
