import os
from dataclasses import dataclass, field
from functools import lru_cache

from dotenv import load_dotenv

load_dotenv()


@dataclass(frozen=True)
class Settings:
    solver_tol: float = 1e-10
    threads: int | None = None
    log_level: str = "INFO"
    cors_origins: list[str] = field(default_factory=lambda: ["http://localhost:3000"])


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = float(raw)
    except ValueError:
        raise RuntimeError(f"{name} must be a number, got {raw!r}")
    if not value > 0:
        raise RuntimeError(f"{name} must be positive, got {raw!r}")
    return value


def _threads_env() -> int | None:
    raw = os.getenv("QCFOLD_THREADS")
    if raw is None or not raw.strip():
        return None
    try:
        value = int(raw)
    except ValueError:
        raise RuntimeError(f"QCFOLD_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise RuntimeError(f"QCFOLD_THREADS must be >= 1, got {raw!r}")
    return value


@lru_cache
def get_settings() -> Settings:
    origins = os.getenv("CORS_ALLOW_ORIGINS", "http://localhost:3000")
    return Settings(
        solver_tol=_float_env("QCFOLD_SOLVER_TOL", 1e-10),
        threads=_threads_env(),
        log_level=os.getenv("QCFOLD_LOG_LEVEL", "INFO").upper(),
        cors_origins=[o.strip() for o in origins.split(",") if o.strip()],
    )
