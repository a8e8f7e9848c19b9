"""Application configuration handling."""
from __future__ import annotations

from functools import lru_cache

try:  # pragma: no cover - import resolution differs across Pydantic versions
    from pydantic import BaseSettings, Field
except Exception:  # Pydantic v2 raises a custom error; fall back to the v1 compatibility layer
    from pydantic.v1 import BaseSettings, Field  # type: ignore


class Settings(BaseSettings):
    """Central numerical configuration for qbass."""

    app_name: str = Field("qbass", description="Human readable application name")
    log: str = Field("info", description="Log level for the CLI (error, info, debug)")
    # Measures
    merge_tol: float = Field(
        1e-12, description="Sup-norm distance below which two atoms are merged and their weights added"
    )
    mass_tol: float = Field(
        1e-6, description="Maximal deviation of the total input mass from 1 before a measure is rejected"
    )
    # Linear programming
    lp_tol: float = Field(1e-10, gt=0, description="Primal and dual feasibility tolerance handed to HiGHS")
    pair_tol: float = Field(
        1e-12, description="Mass above which an atom pair counts as charged in the irreducibility scan"
    )
    primal_size_limit: float = Field(
        2e6, description="Maximal number of joint variables |mu|*|nu|*|q| accepted by the primal LP"
    )
    # Inner solvers
    newton_tol: float = Field(1e-10, description="Gradient residual at which Newton/bisection solves stop")
    newton_max_iter: int = Field(200, description="Iteration cap for Newton/bisection solves")
    # Parallelism
    workers: int = Field(1, description="Worker threads for data-parallel stages (pair scans, simulation)")
    simulation_chunks: int = Field(
        4, description="Number of seeded substreams the path simulation is partitioned into"
    )

    class Config:
        env_prefix = "QBASS_"
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache()
def get_settings() -> Settings:
    """Return memoized application settings."""

    return Settings()

