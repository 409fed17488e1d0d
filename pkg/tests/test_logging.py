"""Tests for the logging module."""

import json
import logging
from io import StringIO
from unittest.mock import patch

import pytest
import structlog

from sparsenet.logging import (
    configure_logging,
    get_logger,
    log_error_with_context,
    log_execution_context,
    log_performance_metrics,
    log_solver_progress,
)


class TestLoggingConfiguration:
    """Test logging configuration."""

    def setup_method(self) -> None:
        """Reset logging configuration before each test."""
        structlog.reset_defaults()
        logging.getLogger().handlers.clear()

    def test_configure_logging_verbose_mode(self) -> None:
        """Test verbose logging configuration."""
        configure_logging(verbose=True, json_output=False)

        assert logging.getLogger().level == logging.DEBUG

    def test_configure_logging_normal_mode(self) -> None:
        """Test normal logging configuration."""
        configure_logging(verbose=False, json_output=False)

        assert logging.getLogger().level == logging.INFO

    def test_configure_logging_level_name(self) -> None:
        """Test the configured level name is honoured unless verbose."""
        configure_logging(level="warning")
        assert logging.getLogger().level == logging.WARNING

        configure_logging(verbose=True, level="warning")
        assert logging.getLogger().level == logging.DEBUG

    def test_unknown_level_falls_back_to_info(self) -> None:
        """Test an unknown level name gives INFO."""
        configure_logging(level="chatty")

        assert logging.getLogger().level == logging.INFO

    def test_get_logger(self) -> None:
        """Test logger creation."""
        configure_logging()
        logger = get_logger("test_logger")

        assert hasattr(logger, "info")
        assert hasattr(logger, "debug")

    @patch("sys.stderr", new_callable=StringIO)
    def test_json_log_output(self, mock_stderr: StringIO) -> None:
        """Test that logs emit JSON lines on stderr."""
        configure_logging(verbose=True, json_output=True)
        logger = get_logger("test")

        logger.info("Fitted", lam=0.1, kappa=3)

        log_data = json.loads(mock_stderr.getvalue().strip())
        assert log_data["event"] == "Fitted"
        assert log_data["lam"] == 0.1
        assert log_data["kappa"] == 3
        assert log_data["level"] == "info"
        assert "timestamp" in log_data

    @patch("sys.stderr", new_callable=StringIO)
    def test_human_readable_output(self, mock_stderr: StringIO) -> None:
        """Test human-readable log output."""
        configure_logging(verbose=True, json_output=False)
        get_logger("test").info("Test message")

        log_output = mock_stderr.getvalue()
        assert "Test message" in log_output
        with pytest.raises(json.JSONDecodeError):
            json.loads(log_output)


class TestLoggingHelpers:
    """Test logging helper functions."""

    def setup_method(self) -> None:
        structlog.reset_defaults()
        logging.getLogger().handlers.clear()

    @patch("sys.stderr", new_callable=StringIO)
    def test_log_solver_progress(self, mock_stderr: StringIO) -> None:
        """Test solver sweeps are logged at debug level with their context."""
        configure_logging(verbose=True, json_output=True)

        log_solver_progress(get_logger("test"), "glasso", 3, -4.5, 1e-3, kkt=2e-4)

        log_data = json.loads(mock_stderr.getvalue().strip())
        assert log_data["level"] == "debug"
        assert log_data["solver"] == "glasso"
        assert log_data["sweep"] == 3
        assert log_data["kkt"] == 2e-4

    @patch("sys.stderr", new_callable=StringIO)
    def test_solver_progress_hidden_at_info(self, mock_stderr: StringIO) -> None:
        """Test sweep records are filtered out at INFO."""
        configure_logging(json_output=True)

        log_solver_progress(get_logger("test"), "lasso", 1, 0.5, 0.1)

        assert mock_stderr.getvalue() == ""

    @patch("sys.stderr", new_callable=StringIO)
    def test_log_performance_metrics(self, mock_stderr: StringIO) -> None:
        """Test throughput is derived from duration and item count."""
        configure_logging(json_output=True)

        log_performance_metrics(
            get_logger("test"), "build_filtration", 2.0, items_processed=50, dim=30
        )

        log_data = json.loads(mock_stderr.getvalue().strip())
        assert log_data["duration_seconds"] == 2.0
        assert log_data["items_per_second"] == 25.0
        assert log_data["dim"] == 30

    @patch("sys.stderr", new_callable=StringIO)
    def test_log_error_with_context(self, mock_stderr: StringIO) -> None:
        """Test error logging carries the error type and message."""
        configure_logging(json_output=True)

        try:
            raise ValueError("Test error message")
        except ValueError as e:
            log_error_with_context(get_logger("test"), e, "glasso", lam=0.2)

        log_data = json.loads(mock_stderr.getvalue().strip().splitlines()[0])
        assert log_data["error_type"] == "ValueError"
        assert log_data["error_message"] == "Test error message"
        assert log_data["operation"] == "glasso"

    @patch("sys.stderr", new_callable=StringIO)
    def test_log_execution_context(self, mock_stderr: StringIO) -> None:
        """Test bound context appears on every later event."""
        configure_logging(json_output=True)

        logger = log_execution_context(get_logger("test"), "filtration", grid=10)
        logger.info("First")
        logger.info("Second")

        lines = [json.loads(line) for line in mock_stderr.getvalue().strip().splitlines()]
        assert [line["event"] for line in lines] == ["First", "Second"]
        assert all(line["operation"] == "filtration" for line in lines)
        assert all(line["grid"] == 10 for line in lines)
