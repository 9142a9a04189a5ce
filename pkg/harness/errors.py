"""
Errors raised while reading scenario files.
"""
from typing import Optional

from mdp.errors import LabError


class ScenarioError(LabError, ValueError):
    """A scenario file cannot be used."""


class ScenarioParseError(ScenarioError):
    """The file is not valid JSON."""

    def __init__(self, path: str, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.column = column


class ScenarioValidationError(ScenarioError):
    """The JSON parses but violates the scenario schema or an MDP invariant."""

    def __init__(self, path: str, message: str, field: Optional[str] = None):
        prefix = f"{path}: {field}: " if field else f"{path}: "
        super().__init__(prefix + message)
        self.path = path
        self.field = field
