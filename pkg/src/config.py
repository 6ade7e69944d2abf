# config.py

import os
from pathlib import Path

from dotenv import load_dotenv

project_root = Path(__file__).parent.parent
env_path = project_root / ".env"
if env_path.exists():
    load_dotenv(env_path, override=True)


def _optional_int(name: str) -> int | None:
    value = os.getenv(name, "").strip()
    return int(value) if value else None


class Config:
    # Parallelism; when set, overrides the CLI --threads flag
    THREADS = _optional_int("OASS_THREADS")

    # Self-training
    TAU = float(os.getenv("OASS_TAU", "0.968"))
    ETA = float(os.getenv("OASS_ETA", "0.999"))
    IGNORE_ABOVE = int(os.getenv("OASS_IGNORE_ABOVE", "11"))
    IGNORE_BELOW = int(os.getenv("OASS_IGNORE_BELOW", "88"))
    CROP_SIZE = int(os.getenv("OASS_CROP_SIZE", "376"))

    # Fusion
    SCORE_THRESHOLD = float(os.getenv("OASS_SCORE_THRESHOLD", "0.95"))

    # AoMix random scaling range
    SCALE_MIN = float(os.getenv("OASS_SCALE_MIN", "0.1"))
    SCALE_MAX = float(os.getenv("OASS_SCALE_MAX", "0.8"))

    SEED = int(os.getenv("OASS_SEED", "0"))

    # Logging
    LOG_LEVEL = os.getenv("OASS_LOG_LEVEL", "INFO").upper()
    LOG_DIR = os.getenv("OASS_LOG_DIR", "")
