import os
import logging
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

load_dotenv()

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Settings(BaseModel):
    """Environment-driven defaults; CLI flags take precedence"""
    model_config = ConfigDict(frozen=True)

    log_level: str = "INFO"
    workers: int = Field(default=1, ge=1)
    default_backend: str = "sa"
    default_iterations: int = Field(default=20000, ge=1)
    exhaustive_max_ties: int = Field(default=10000, ge=1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings(
        log_level=os.getenv("BQAP_LOG_LEVEL", "INFO"),
        workers=int(os.getenv("BQAP_WORKERS", "1")),
        default_backend=os.getenv("BQAP_DEFAULT_BACKEND", "sa"),
        default_iterations=int(os.getenv("BQAP_DEFAULT_ITERATIONS", "20000")),
        exhaustive_max_ties=int(os.getenv("BQAP_EXHAUSTIVE_MAX_TIES", "10000")),
    )


def configure_logging(level: str | None = None) -> None:
    """Install a single stderr handler on the package logger"""
    level_name = (level or get_settings().log_level).upper()
    root = logging.getLogger("bqap")
    root.setLevel(getattr(logging, level_name, logging.INFO))

    # Re-configuring replaces the previous handler instead of stacking them
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.propagate = False
