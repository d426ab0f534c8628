"""
Application configuration using Pydantic Settings.

Process-level settings are loaded from a .env file or the environment with the
RTI_ prefix. Scenario parameters live in scenario files (see src.services.scenario_io).
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="RTI_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "Detector RTI"
    app_version: str = "0.1.0"
    debug: bool = Field(default=False, description="Log at DEBUG unless --quiet or --log-level is given")

    # Logging
    log_level: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR)$")

    # Runs
    default_out_dir: str = "runs"

    # Evaluation
    significance: float = Field(default=0.05, gt=0.0, lt=1.0, description="KS test level")
    bootstrap_samples: int = Field(default=200, ge=10)


@lru_cache
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Uses lru_cache to avoid re-reading environment on every call.
    """
    return Settings()
