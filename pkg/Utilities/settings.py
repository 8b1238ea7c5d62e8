import os
from dotenv import load_dotenv
from pathlib import Path

# Load .env from project root (works regardless of where the CLI is started)
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(dotenv_path=env_path)

PROJECT_ROOT = Path(__file__).parent.parent
RESOURCES_DIR = PROJECT_ROOT / 'Resources'

THREADS = int(os.getenv('MODESCATTER_THREADS', 1))
LOG_LEVEL = os.getenv('MODESCATTER_LOG_LEVEL', 'INFO')
OUTPUT_DIR = os.getenv('MODESCATTER_OUTPUT_DIR', 'runs')

# relative half-width of the refused band around every threshold
GUARD_BAND = float(os.getenv('MODESCATTER_GUARD_BAND', 1e-6))
# condition estimate above which a solve is aborted
SINGULAR_THRESHOLD = float(os.getenv('MODESCATTER_SINGULAR_THRESHOLD', 1e8))

DEFAULT_MARGIN = 2.0
DEFAULT_EVANESCENT_MODES = 8


def thread_count(override: int | None = None) -> int:
    """Resolve the worker pool size: explicit flag first, then environment."""
    if override is not None and override > 0:
        return override
    return max(1, int(os.getenv('MODESCATTER_THREADS', THREADS)))
