# common_utils/errors.py
from typing import Optional


class ToolkitError(Exception):
    """
    Base error for the toolkit.
    Carries a process exit code the same way an HTTP error carries a status code.
    """
    exit_code = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class UsageError(ToolkitError):
    exit_code = 2


class ConfigError(UsageError):
    pass


class AlistParseError(UsageError):
    def __init__(self, line: int, detail: str):
        super().__init__(f"alist line {line}: {detail}")
        self.line = line


class MoveUnavailableError(ToolkitError):
    exit_code = 1


class ConstructionError(ToolkitError):
    exit_code = 1


class NotBracketedError(ToolkitError):
    exit_code = 3
