"""
Scenario loader for reading, validating and exporting scenario JSON files.
"""
import json
import logging
import os
from typing import List, Optional

from pydantic import ValidationError

from .errors import ScenarioParseError, ScenarioValidationError
from .models import ScenarioFile

logger = logging.getLogger(__name__)


class ScenarioLoader:
    """Loader for scenario files, including the built-in library."""

    def __init__(self, data_dir: Optional[str] = None):
        """
        Initialize the loader.

        Args:
            data_dir: Directory holding the built-in scenario files
        """
        self.data_dir = data_dir or os.path.join(os.path.dirname(__file__), "..", "data", "scenarios")
        self.data_dir = os.path.abspath(self.data_dir)

    def load_from_json(self, filepath: str) -> ScenarioFile:
        """
        Load and validate a scenario from a JSON file.

        Raises:
            ScenarioParseError: the file is not valid JSON (carries line and column).
            ScenarioValidationError: the document violates the schema or an MDP invariant.
            FileNotFoundError: the file does not exist.
        """
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                text = f.read()
        except UnicodeDecodeError as exc:
            raise ScenarioParseError(filepath, f"not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
        return self.parse(text, filepath)

    def parse(self, text: str, source: str = "<string>") -> ScenarioFile:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(source, exc.msg, exc.lineno, exc.colno) from exc

        try:
            scenario = ScenarioFile.model_validate(data)
        except ValidationError as exc:
            error = exc.errors()[0]
            field = ".".join(str(part) for part in error["loc"]) or None
            message = str(error["msg"]).removeprefix("Value error, ")
            raise ScenarioValidationError(source, message, field) from exc

        logger.debug(f"Loaded scenario {scenario.id} ({scenario.experiment.kind}) from {source}")
        return scenario

    def list_builtins(self) -> List[str]:
        """Names of the built-in scenarios, sorted."""
        if not os.path.isdir(self.data_dir):
            logger.warning(f"Scenario directory {self.data_dir} does not exist")
            return []
        return sorted(name[:-5] for name in os.listdir(self.data_dir) if name.endswith(".json"))

    def load_builtin(self, name: str) -> ScenarioFile:
        """
        Load a built-in scenario by name.

        Raises:
            ScenarioValidationError: no built-in has that name.
        """
        path = os.path.join(self.data_dir, f"{name}.json")
        if not os.path.exists(path):
            raise ScenarioValidationError(
                name, f"No built-in scenario named {name!r} (available: {', '.join(self.list_builtins())})"
            )
        return self.load_from_json(path)

    def export_to_json(self, scenario: ScenarioFile, filepath: str) -> None:
        """Write a scenario so that loading it again yields an equal ScenarioFile."""
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)

        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(scenario.model_dump(mode="json"), f, indent=2, ensure_ascii=False)


default_loader = ScenarioLoader()


def load_scenario(path: str) -> ScenarioFile:
    return default_loader.load_from_json(path)


def load_builtin(name: str) -> ScenarioFile:
    return default_loader.load_builtin(name)


def list_builtins() -> List[str]:
    return default_loader.list_builtins()


def dump_scenario(scenario: ScenarioFile, path: str) -> None:
    default_loader.export_to_json(scenario, path)
