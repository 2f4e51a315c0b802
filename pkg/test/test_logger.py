import logging
import os
import uuid
from unittest.mock import patch

from common_utils.logger.client import LoggerClient, component_loggers, get_logger


def unique_name(prefix="test"):
    return f"{prefix}_{uuid.uuid4().hex[:8]}"


def test_logger_creation():
    """Test that logger is created correctly"""
    name = unique_name()
    logger = get_logger(name)
    assert isinstance(logger, logging.Logger)
    assert logger.name == f"ldpc.{name}"
    assert logger.propagate is False
    assert get_logger(name) is logger
    assert component_loggers[name] is logger


def test_log_level_from_environment(monkeypatch):
    monkeypatch.setenv("LDPC_LOG_LEVEL", "warning")
    logger = get_logger(unique_name())
    assert logger.level == logging.WARNING


def test_component_log_file(tmpdir, monkeypatch):
    """Test that a log directory adds a per-component file"""
    monkeypatch.setenv("LDPC_LOG_LEVEL", "INFO")
    name = unique_name("component")
    client = LoggerClient(name, log_dir=str(tmpdir))
    assert client.info("Construction finished", {"n": 64, "c4": 0}) is True

    for handler in get_logger(name).handlers:
        handler.flush()
    with open(os.path.join(str(tmpdir), f"{name}.log")) as f:
        content = f.read()
    assert "Construction finished" in content
    assert '"c4": 0' in content


def test_log_dir_from_environment(tmpdir, monkeypatch):
    monkeypatch.setenv("LDPC_LOG_DIR", str(tmpdir))
    name = unique_name("env")
    LoggerClient(name).warning("Rank repair stopped below target")
    assert os.path.exists(os.path.join(str(tmpdir), f"{name}.log"))


def test_logger_client_levels(monkeypatch):
    """Test the logger client functionality"""
    monkeypatch.setenv("LDPC_LOG_LEVEL", "INFO")
    client = LoggerClient(unique_name("client"))
    with patch.object(logging.Logger, "log") as mock_log:
        assert client.info("Test message") is True
        mock_log.assert_called_with(logging.INFO, "Test message")

        assert client.error("Test error message", {"exit_code": 2}) is True
        mock_log.assert_called_with(logging.ERROR, 'Test error message - Details: {"exit_code": 2}')

        assert client.warning("Test warning", details={"key": "value"}) is True
        level, message = mock_log.call_args[0]
        assert level == logging.WARNING
        assert message.endswith('{"key": "value"}')


def test_debug_below_threshold_is_dropped(monkeypatch):
    monkeypatch.setenv("LDPC_LOG_LEVEL", "INFO")
    client = LoggerClient(unique_name("quiet"))
    with patch.object(logging.Logger, "log") as mock_log:
        assert client.debug("Test debug message") is False
        mock_log.assert_not_called()


def test_logger_client_never_raises(capsys):
    """Failures while logging fall back to stderr"""
    client = LoggerClient(unique_name("broken"))
    with patch("common_utils.logger.client.get_logger", side_effect=OSError("disk full")):
        assert client.error("Test error message") is False
    assert "disk full" in capsys.readouterr().err
