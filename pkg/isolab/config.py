"""
Configuration
=============

Run-wide settings read from the environment (and a ``.env`` file when
present). Command line flags override individual fields.
"""

import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import ConfigurationError

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class IsolabConfig(BaseModel):
    """Configuration for isolab runs"""

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = "INFO"
    log_dir: Optional[str] = None
    tol: float = Field(default=1e-10, gt=0)
    hbar: float = Field(default=1.0, gt=0)
    t1_margin: float = Field(default=1e-3, ge=0)
    max_rank: int = Field(default=3, ge=0)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if value not in _LOG_LEVELS:
            raise ValueError(f"unknown log level {value!r}")
        return value

    @classmethod
    def from_env(cls, overrides: Optional[Dict[str, Any]] = None) -> "IsolabConfig":
        """Build the configuration from ISOLAB_* variables, then apply overrides"""
        load_dotenv()
        raw: Dict[str, Any] = {}
        env_map = {
            "threads": "ISOLAB_THREADS",
            "log_level": "ISOLAB_LOG_LEVEL",
            "log_dir": "ISOLAB_LOG_DIR",
            "tol": "ISOLAB_TOL",
            "hbar": "ISOLAB_HBAR",
            "t1_margin": "ISOLAB_T1_MARGIN",
            "max_rank": "ISOLAB_MAX_RANK",
        }
        for field, variable in env_map.items():
            value = os.getenv(variable)
            if value not in (None, ""):
                raw[field] = value
        for field, value in (overrides or {}).items():
            if value is not None:
                raw[field] = value
        try:
            return cls(**raw)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid configuration: {e.errors()[0]['msg']}",
                                     {"fields": sorted(raw)}) from e

    def validate_environment(self) -> None:
        """Check settings that depend on the filesystem"""
        if self.log_dir is not None and os.path.exists(self.log_dir) and not os.path.isdir(self.log_dir):
            raise ConfigurationError(f"ISOLAB_LOG_DIR is not a directory: {self.log_dir}")
