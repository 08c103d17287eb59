"""Exception hierarchy for crossdesign"""
from typing import Optional, Dict, Any
from datetime import datetime
import logging

logger = logging.getLogger(__name__)


class CrossDesignError(Exception):
    """Base exception for all crossdesign errors"""
    ERROR_CODES: Dict[str, str] = {}

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        self.timestamp = datetime.now()
        super().__init__(self.message)
        logger.debug(f"{self.__class__.__name__}: {message}", extra={'error_details': self.details})

    @property
    def error_code(self) -> Optional[str]:
        return self.details.get('error_code')


class ConfigurationError(CrossDesignError):
    """Invalid runtime configuration"""
    pass


class UsageError(CrossDesignError):
    """Invalid request from a caller, e.g. an unknown estimator name"""
    def __init__(self, message: str, valid: Optional[list] = None, **kwargs):
        details = dict(kwargs)
        if valid is not None:
            details['valid'] = list(valid)
            message = f"{message} (valid: {', '.join(valid)})"
        super().__init__(message, details)


# Data errors
class DataError(CrossDesignError):
    """Problems with input data"""
    ERROR_CODES = {
        'DATA001': 'Malformed row',
        'DATA002': 'Column or value outside the schema',
        'DATA003': 'No rows',
        'DATA004': 'Invalid design expression',
    }

    def __init__(self, message: str, error_code: str, **kwargs):
        super().__init__(
            message,
            details={
                'error_code': error_code,
                'error_description': self.ERROR_CODES.get(error_code, 'Unknown error'),
                **kwargs
            }
        )


class ParseError(DataError):
    """Malformed input row"""
    def __init__(self, message: str, row: Optional[int] = None, **kwargs):
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(f"{prefix}{message}", 'DATA001', row=row, **kwargs)


class SchemaError(DataError):
    """Missing column or value outside its allowed set"""
    def __init__(self, message: str, column: Optional[str] = None,
                 row: Optional[int] = None, **kwargs):
        self.column = column
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(f"{prefix}{message}", 'DATA002', column=column, row=row, **kwargs)


class EmptyInputError(DataError):
    """Input holds no data rows"""
    def __init__(self, message: str = "input has no data rows", **kwargs):
        super().__init__(message, 'DATA003', **kwargs)


class DesignError(DataError):
    """A design expression could not be evaluated"""
    def __init__(self, message: str, expression: str, **kwargs):
        self.expression = expression
        super().__init__(f"{message}: {expression!r}", 'DATA004', expression=expression, **kwargs)


# Fitting errors
class FitError(CrossDesignError):
    """Nuisance model fitting failures"""
    pass


class RankDeficiencyError(FitError):
    """Singular normal equations with no ridge penalty"""
    def __init__(self, message: str, columns: int, rank: int, n: int):
        super().__init__(
            f"{message}; design has {columns} columns but rank {rank} on {n} rows, "
            f"set ridge_penalty > 0",
            details={'columns': columns, 'rank': rank, 'n': n}
        )


class ConvergenceError(FitError):
    """Newton iterations did not converge even under the fallback ridge"""
    def __init__(self, message: str, iterations: int, max_change: float,
                 gradient_norm: float, penalty: float):
        super().__init__(
            message,
            details={
                'iterations': iterations,
                'max_change': max_change,
                'gradient_norm': gradient_norm,
                'penalty': penalty,
            }
        )


class SingleClassError(FitError):
    """Binary target carries a single class"""
    pass


class EnsembleError(FitError):
    """Every ensemble member failed"""
    def __init__(self, message: str, failures: Dict[str, str]):
        super().__init__(message, details={'failures': failures})


# Estimation errors
class StratumError(CrossDesignError):
    """A required fitting stratum is empty or lacks a treatment level"""
    def __init__(self, message: str, stratum: str, level: Optional[str] = None):
        self.stratum = stratum
        self.level = level
        super().__init__(message, details={'stratum': stratum, 'level': level})


class OverlapError(CrossDesignError):
    """Overlap region cannot be estimated"""
    pass


class EstimationError(CrossDesignError):
    """Point estimation failures"""
    pass


class ZeroWeightSumError(EstimationError):
    """A weighted mean has no contributing units"""
    def __init__(self, term: str, treatment: str):
        self.term = term
        super().__init__(
            f"weights {term} sum to zero for treatment {treatment}",
            details={'term': term, 'treatment': treatment, 'stratum': term}
        )


class BootstrapInstabilityError(EstimationError):
    """Replicates keep failing after redraws"""
    def __init__(self, stratum: Optional[str], attempts: int, replicate: int):
        self.stratum = stratum
        super().__init__(
            f"bootstrap instability: replicate {replicate} failed {attempts} redraws "
            f"(failing stratum: {stratum or 'unknown'})",
            details={'stratum': stratum, 'attempts': attempts, 'replicate': replicate}
        )


class ScenarioError(CrossDesignError):
    """Scenario file parse or validation errors"""
    def __init__(self, message: str, errors: Optional[list] = None):
        super().__init__(message, details={'errors': errors or []})
