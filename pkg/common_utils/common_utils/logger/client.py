# common_utils/logger/client.py
import json
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

# Configure different log handlers for different components
component_loggers = {}


def get_logger(service_name: str, log_dir: Optional[str] = None) -> logging.Logger:
    """Get or create a logger for a specific component"""
    if service_name not in component_loggers:
        logger = logging.getLogger(f"ldpc.{service_name}")
        logger.setLevel(os.environ.get("LDPC_LOG_LEVEL", "INFO").upper())
        logger.propagate = False

        stream_handler = logging.StreamHandler(sys.stderr)
        stream_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))
        logger.addHandler(stream_handler)

        log_dir = log_dir or os.environ.get("LDPC_LOG_DIR")
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
            # Create component-specific log file
            file_handler = RotatingFileHandler(
                os.path.join(log_dir, f"{service_name}.log"),
                maxBytes=10*1024*1024,  # 10MB
                backupCount=5
            )
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(levelname)s - %(message)s'
            ))
            logger.addHandler(file_handler)

        component_loggers[service_name] = logger

    return component_loggers[service_name]


class LoggerClient:
    def __init__(self, service_name, log_dir=None):
        self.service_name = service_name
        self.log_dir = log_dir

    def _send_log(self, level, message, details=None):
        try:
            logger = get_logger(self.service_name, self.log_dir)
            log_message = message
            if details:
                log_message += f" - Details: {json.dumps(details, default=str, sort_keys=True)}"

            levelno = getattr(logging, level)
            if not logger.isEnabledFor(levelno):
                return False
            logger.log(levelno, log_message)
            return True
        except Exception as e:
            # fall back to stderr; logging never raises
            print(f"Error writing log record: {str(e)}", file=sys.stderr)
            print(f"{level} - {message} - {details}", file=sys.stderr)
            return False

    def info(self, message, details=None):
        return self._send_log("INFO", message, details)

    def error(self, message, details=None):
        return self._send_log("ERROR", message, details)

    def warning(self, message, details=None):
        return self._send_log("WARNING", message, details)

    def debug(self, message, details=None):
        return self._send_log("DEBUG", message, details)
