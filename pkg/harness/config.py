"""
Runtime settings for the harness, read from the environment (and a .env file).

None of these settings change numeric results.
"""
import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()

TOOL_VERSION = "0.1.0"


class LabSettings(BaseModel):
    log_level: str = Field("INFO", description="Root log level for the CLI")
    max_workers: int = Field(4, ge=1, description="Thread pool size for sweep runs")

    @classmethod
    def from_env(cls) -> "LabSettings":
        return cls(
            log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
            max_workers=int(os.getenv("RPLAB_MAX_WORKERS", "4")),
        )
