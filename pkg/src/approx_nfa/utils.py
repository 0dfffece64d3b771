"""Utility functions: logging, worker counts, parallel map and exact numbers."""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, TypeVar, Union

from .constants import WORKERS_ENV_VAR
from .models import UsageError

T = TypeVar('T')
R = TypeVar('R')

LOG_FORMAT = '%(asctime)s [%(name)s] [%(levelname)s] %(message)s'
LOG_DATEFMT = '%Y-%m-%d %H:%M:%S'

# Map verbosity levels to logging levels
LEVEL_MAP = {
    0: logging.ERROR,    # Quiet - only errors
    1: logging.INFO,     # Normal - info and above
    2: logging.DEBUG,    # Verbose - debug and above
}


def log_level(verbosity_level: int) -> int:
    return LEVEL_MAP.get(min(verbosity_level, 2), logging.INFO)


def setup_logging(verbosity_level: int) -> logging.Logger:
    """Setup logging configuration based on verbosity level (0=quiet, 1=normal, 2+=debug)."""
    logging.basicConfig(level=log_level(verbosity_level), format=LOG_FORMAT, datefmt=LOG_DATEFMT)
    return logging.getLogger('approx-nfa')


def console_logger(name: str, verbosity_level: int = 1) -> logging.Logger:
    """Standalone stream logger for API users who do not configure logging."""
    logger = logging.Logger(name, level=log_level(verbosity_level))
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT, LOG_DATEFMT))
    logger.addHandler(handler)
    return logger


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit value, else $APPROX_NFA_WORKERS, else 1."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV_VAR, '').strip()
        if not raw:
            return 1
        try:
            workers = int(raw)
        except ValueError:
            raise UsageError(f'{WORKERS_ENV_VAR} must be an integer, got {raw!r}') from None
    if workers < 1:
        raise UsageError(f'worker count must be at least 1, got {workers}')
    return workers


def parallel_map(func: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """``[func(x) for x in items]``, in a process pool when workers > 1; order kept."""
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def exact(value: Union[int, float, str, Fraction]) -> Fraction:
    """Fraction of the decimal text of a number: exact(6.4) == Fraction(32, 5)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise UsageError(f'expected a number, got {value!r}')
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f'not a number: {value!r}') from None


def parse_grid(text: str) -> List[float]:
    """Comma-separated numbers, e.g. ``0.2,0.5,1``."""
    values = []
    for token in text.split(','):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            raise UsageError(f'bad grid value {token!r}') from None
    if not values:
        raise UsageError('parameter grid is empty')
    return values
