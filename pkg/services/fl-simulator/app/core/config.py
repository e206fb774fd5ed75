"""
FL Simulator Service Configuration
"""
import os
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process-level settings with environment variable support"""

    # Service Info
    SERVICE_NAME: str = "FEEL Wireless Simulator"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Output
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "results")
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", "0"))
    LOG_EVERY: int = int(os.getenv("LOG_EVERY", "50"))

    # Performance
    NUM_WORKERS: int = int(os.getenv("NUM_WORKERS", "1"))

    # Channel / transmission numerics
    NORM_FLOOR: float = 1e-12
    DEFAULT_THRESHOLD: float = float(os.getenv("DEFAULT_THRESHOLD", "1e-4"))
    CEIL_BIT_COST: bool = False
    KKT_TOL: float = 1e-9

    # Convergence bound
    BOUND_HORIZON: int = 10_000
    PLATEAU_WINDOW: float = 0.1
    PLATEAU_TOL: float = 1e-6

    class Config:
        env_file = ".env"
        case_sensitive = True


# Global settings instance
settings = Settings()
