"""Application configuration using pydantic-settings."""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    # Application
    app_name: str = "spectral-dga"
    app_version: str = "0.1.0"
    log_level: str = "INFO"
    log_file: Path | None = None  # also write log records here

    # Rank decisions
    rank_tol: float = 1e-9  # relative singular-value cutoff
    containment_factor: float = 10.0  # containment check runs at this multiple of rank_tol
    marginal_factor: float = 10.0  # values within this factor of a cutoff are marginal

    # Resource guards
    max_dim: int = 4096  # ambient matrix dimension cap for dense realizations
    max_words: int = 20000  # word enumeration cap per degree
    max_heat_level: int = 4_000_000  # largest truncation level bound for a heat trace

    # Heat functionals
    tail_tol: float = 1e-12  # truncated tail relative to the computed trace
    heat_t0: float = 0.5
    heat_ratio: float = 2.0
    heat_nodes: int = 8
    extrapolation_order: int = 2
    summability_t0: float = 0.1
    summability_residual_tol: float = 0.05  # log-log fit residual above this is reported
    k_tol: float = 1e-6  # K-space membership, relative to the functional of the identity
    fgr_t0: float = 0.05  # FGR Gram entries need smaller t than plain trace limits

    # Reports
    float_digits: int = 12
    output_dir: Path = Path("reports")
    scenarios_dir: Path = Path(__file__).parent / "scenarios"

    # Concurrency
    spectral_dga_threads: int | None = Field(default=None, ge=1)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
