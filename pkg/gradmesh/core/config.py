from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict

from gradmesh.core.version import __version__


class Settings(BaseSettings):
    """Process settings loaded from environment variables (GRADMESH_*)."""

    model_config = SettingsConfigDict(
        env_prefix="GRADMESH_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    LOG: Literal["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"] = "INFO"
    OUTPUT_DIR: str = "results"
    # Per-op event log kept by every substrate world; 0 disables it
    EVENT_LOG_LIMIT: int = 0
    # Real seconds a concurrent-mode task sleeps after an unmet poll
    CONCURRENT_POLL_BACKOFF: float = 0.0005


settings = Settings()

APP_VERSION = __version__
