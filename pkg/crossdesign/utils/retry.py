"""Redraw logic for resampling steps that hit degenerate strata"""
import logging
from functools import wraps
from typing import Callable, Optional, Tuple, Type

from crossdesign.config import settings
from crossdesign.exceptions import (
    BootstrapInstabilityError, EstimationError, FitError, OverlapError, StratumError
)
from crossdesign.monitoring.metrics import MetricsTracker

logger = logging.getLogger(__name__)

REDRAWABLE: Tuple[Type[Exception], ...] = (StratumError, EstimationError, FitError, OverlapError)


class RetryConfig:
    """Configuration for redraw behaviour"""
    def __init__(self,
                 max_attempts: int = settings.MAX_BOOTSTRAP_REDRAWS,
                 retry_on: Tuple[Type[Exception], ...] = REDRAWABLE):
        self.max_attempts = max_attempts
        self.retry_on = retry_on


def _failing_stratum(error: Exception) -> Optional[str]:
    details = getattr(error, 'details', {}) or {}
    return details.get('stratum') or type(error).__name__


def with_redraw(metrics_tracker: Optional[MetricsTracker] = None,
                retry_config: Optional[RetryConfig] = None):
    """Decorator that re-invokes ``func(index, attempt=k)`` with a fresh attempt number.

    The wrapped function derives its random stream from ``(index, attempt)``, so
    each retry is a new draw. ``BootstrapInstabilityError`` is raised once
    ``max_attempts`` draws have failed.
    """
    retry_config = retry_config or RetryConfig()

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(index: int, *args, **kwargs):
            last_stratum = None
            for attempt in range(retry_config.max_attempts):
                try:
                    return func(index, *args, attempt=attempt, **kwargs)
                except BootstrapInstabilityError:
                    raise
                except retry_config.retry_on as e:
                    last_stratum = _failing_stratum(e)
                    if metrics_tracker:
                        metrics_tracker.track_redraw(last_stratum)
                    logger.warning(
                        f"Degenerate draw in {func.__name__} (index {index}), "
                        f"attempt {attempt + 1}/{retry_config.max_attempts}: {e}"
                    )
            raise BootstrapInstabilityError(last_stratum, retry_config.max_attempts, index)

        return wrapper
    return decorator
