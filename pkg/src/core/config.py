import os
from pathlib import Path

from pydantic_settings import BaseSettings

VERSION = "0.1.0"


class Settings(BaseSettings):
    LOG_LEVEL: str = os.getenv("FORGE_LOG_LEVEL", "INFO")
    THREADS: int = int(os.getenv("FORGE_THREADS", "1"))
    OUTPUT_DIR: Path = Path(os.getenv("FORGE_OUTPUT_DIR", "runs"))

    # Numerical tolerances, one decade apart between layers.
    UNITARITY_TOL: float = 1e-10
    RECONSTRUCTION_TOL: float = 1e-8
    OPTIMIZER_TOL: float = 1e-6
    FILE_UNITARITY_TOL: float = 1e-8

    SK_BASIS_CAP: int = 2_000_000
    MAX_QUBITS: int = 6

    class Config:
        env_file = ".env"
        env_prefix = "FORGE_"


settings = Settings()
