"""Runtime configuration for crossdesign"""
from dataclasses import dataclass, field

from crossdesign.config import settings
from crossdesign.exceptions import ConfigurationError

LOG_LEVELS = {'DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'}
LOG_FORMATS = {'json', 'console'}


@dataclass
class CrossDesignConfig:
    """Central configuration, defaults taken from the environment"""
    LOG_LEVEL: str = field(default_factory=lambda: settings.LOG_LEVEL)
    LOG_FORMAT: str = field(default_factory=lambda: settings.LOG_FORMAT)
    TRIM_FLOOR: float = field(default_factory=lambda: settings.TRIM_FLOOR)
    THREADS: int = field(default_factory=lambda: settings.THREADS)
    OUTPUT_DIR: str = field(default_factory=lambda: settings.OUTPUT_DIR)

    def validate(self) -> bool:
        """Validate configuration values"""
        if self.LOG_LEVEL.upper() not in LOG_LEVELS:
            raise ConfigurationError(f"LOG_LEVEL must be one of {sorted(LOG_LEVELS)}",
                                     {'LOG_LEVEL': self.LOG_LEVEL})
        if self.LOG_FORMAT not in LOG_FORMATS:
            raise ConfigurationError(f"LOG_FORMAT must be one of {sorted(LOG_FORMATS)}",
                                     {'LOG_FORMAT': self.LOG_FORMAT})
        if not 0 < self.TRIM_FLOOR < 0.5:
            raise ConfigurationError("TRIM_FLOOR must lie in (0, 0.5)",
                                     {'TRIM_FLOOR': self.TRIM_FLOOR})
        if self.THREADS < 1:
            raise ConfigurationError("THREADS must be at least 1", {'THREADS': self.THREADS})
        return True


__all__ = ['CrossDesignConfig']
