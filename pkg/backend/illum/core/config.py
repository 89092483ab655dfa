"""
Configuration settings for ILLUM
"""

import logging
import sys
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolchain settings"""

    # Application
    APP_NAME: str = "ILLUM"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    ILLUM_TRACE: bool = False

    # Language
    DEFAULT_TOKEN: str = "T"
    INT_BITS: int = 64

    # Encoding
    ENCODING_MAGIC: str = "ILM1"

    # Keys
    KEY_SEED: str = "illum"

    # Simulation
    SIM_MAX_STEPS: int = 200

    # Artifacts
    ARTIFACT_INDENT: int = 2

    class Config:
        env_file = ".env"
        case_sensitive = True

    @property
    def int_min(self) -> int:
        return -(1 << (self.INT_BITS - 1))

    @property
    def int_max(self) -> int:
        return (1 << (self.INT_BITS - 1)) - 1

    @property
    def magic(self) -> bytes:
        magic = self.ENCODING_MAGIC.encode("ascii")
        if len(magic) != 4:
            raise ValueError(f"ENCODING_MAGIC must be 4 bytes, got {magic!r}")
        return magic


# Create settings instance
settings = Settings()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Install the root handler; ILLUM_TRACE forces DEBUG"""
    if settings.ILLUM_TRACE:
        level = "DEBUG"
    level = (level or settings.LOG_LEVEL).upper()

    root = logging.getLogger()
    if not any(getattr(h, "_illum", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._illum = True
        root.addHandler(handler)
    root.setLevel(level)
