"""Application settings."""

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Service settings (HTTP, logging, celery). Analysis defaults are not read from the environment."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", case_sensitive=False, extra="ignore")

    app_name: str = "Semilinear Order Analysis"
    app_version: str = "0.1.0"
    debug: bool = False

    log_level: str = "INFO"
    log_dir: str = "logs"

    host: str = "0.0.0.0"
    port: int = 8000

    redis_host: str = "localhost"
    redis_port: int = 6379
    redis_db: int = 0

    celery_broker_url: str = "redis://localhost:6379/0"
    celery_result_backend: str = "redis://localhost:6379/0"

    def redis_url(self) -> str:
        """Construct Redis URL."""
        return f"redis://{self.redis_host}:{self.redis_port}/{self.redis_db}"


class AnalysisDefaults(BaseModel):
    """Numerical defaults shared by the CLI, the HTTP API and the library entry points.

    Flags and request parameters override these values; environment variables never do,
    so two runs with the same arguments always see the same numbers.
    """

    model_config = {"frozen": True}

    tol: float = Field(1e-10, gt=0, description="Zero threshold for float-mode residuals")
    max_order: int = Field(5, ge=1, le=6, description="Largest tree order checked by the condition checker")
    stage_order_cap: int = 10
    classical_order_cap: int = 5
    max_tree_order: int = 10

    boundary_samples: int = Field(4096, ge=16, description="Samples of the imaginary axis for stability sweeps")
    verdict_slack: float = 1e-12
    inconclusive_slack: float = 1e-9
    axis_guard: float = 1e-9
    nevanlinna_slack: float = 1e-6

    t0: float = 0.0
    tf: float = 1.0
    h_exponents: tuple[int, int] = (3, 12)
    lambdas: tuple[float, ...] = (-1e2, -1e4, -1e6)
    jobs: int = Field(1, ge=1)
    order_gate_slack: float = 0.2

    newton_rtol: float = 1e-12
    newton_atol_scale: float = 1e-12
    newton_max_iter: int = 50
    newton_stall_limit: int = 10


ANALYSIS_DEFAULTS = AnalysisDefaults()

settings = Settings()
