"""Process-level runtime settings read from the environment."""

from __future__ import annotations

import os
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    """
    Settings shared by the library and the CLI.

    Values come from ``TRANSPORT_FILTER_*`` environment variables, e.g.
    ``TRANSPORT_FILTER_WORKERS=4``.
    """

    model_config = SettingsConfigDict(env_prefix="TRANSPORT_FILTER_", extra="ignore")

    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = "WARNING"


@lru_cache(maxsize=1)
def get_settings() -> RuntimeSettings:
    """Return the cached settings instance."""
    return RuntimeSettings()
