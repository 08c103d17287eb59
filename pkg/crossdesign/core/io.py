"""CSV ingestion and export of target samples"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from crossdesign.core.sample import TargetSample
from crossdesign.exceptions import EmptyInputError, ParseError, SchemaError

logger = logging.getLogger(__name__)

# Data rows start on file line 2
HEADER_LINES = 1


@dataclass(frozen=True)
class SampleSchema:
    """Column mapping for sample files"""
    y: str = 'y'
    a: str = 'a'
    s: str = 's'
    weight: str = 'w'
    covariates: Optional[Sequence[str]] = None


def _line(position: int) -> int:
    return position + HEADER_LINES + 1


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    values = pd.to_numeric(raw.str.strip(), errors='coerce')
    missing = raw.str.strip().eq('') | raw.isna()
    if missing.any():
        position = int(np.flatnonzero(missing.to_numpy())[0])
        raise ParseError(f"missing value in column {column!r}", row=_line(position), column=column)
    bad = values.isna()
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"cannot parse {raw.iloc[position]!r} as a number in column {column!r}",
                         row=_line(position), column=column)
    return values.to_numpy(dtype=float)


def load_sample(path: Union[str, Path], schema: Optional[SampleSchema] = None) -> TargetSample:
    """Read a sample CSV.

    Every cell is read as text first so row-level problems can be reported with
    their file line number. Covariates default to every column other than the
    outcome, treatment, study and weight columns.
    """
    schema = schema or SampleSchema()
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"{path} is empty")
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed CSV: {e}")

    frame.columns = [str(c).strip() for c in frame.columns]
    for column in (schema.y, schema.a, schema.s):
        if column not in frame.columns:
            raise SchemaError(f"missing required column {column!r}", column=column)

    if schema.covariates is not None:
        covariates = list(schema.covariates)
        absent = [c for c in covariates if c not in frame.columns]
        if absent:
            raise SchemaError(f"missing covariate column {absent[0]!r}", column=absent[0])
    else:
        reserved = {schema.y, schema.a, schema.s, schema.weight}
        covariates = [c for c in frame.columns if c not in reserved]
    if not covariates:
        raise SchemaError("no covariate columns found")

    if frame.empty:
        raise EmptyInputError(f"{path} has a header but no data rows")

    y = _numeric(frame, schema.y)
    s = _numeric(frame, schema.s)
    bad_s = np.flatnonzero(~np.isin(s, (0.0, 1.0)))
    if bad_s.size:
        position = int(bad_s[0])
        raise SchemaError(f"study indicator must be 0 or 1, got {frame[schema.s].iloc[position]!r}",
                          column=schema.s, row=_line(position))
    a = frame[schema.a].str.strip()
    empty_a = np.flatnonzero(a.eq('').to_numpy())
    if empty_a.size:
        raise ParseError(f"missing value in column {schema.a!r}", row=_line(int(empty_a[0])),
                         column=schema.a)
    x = np.column_stack([_numeric(frame, c) for c in covariates])
    weight = _numeric(frame, schema.weight) if schema.weight in frame.columns else None

    sample = TargetSample(y, a.tolist(), s.astype(int), x, weight=weight, covariate_names=covariates)
    logger.info(f"Loaded {sample!r} from {path}")
    return sample


def sample_frame(sample: TargetSample, include_weight: Optional[bool] = None) -> pd.DataFrame:
    """Tabular view with columns y, a, s, covariates and (optionally) w"""
    frame = pd.DataFrame({'y': sample.y, 'a': sample.a.astype(str), 's': sample.s})
    for j, name in enumerate(sample.covariate_names):
        frame[name] = sample.x[:, j]
    if include_weight is None:
        include_weight = not np.all(sample.weight == 1.0)
    if include_weight:
        frame['w'] = sample.weight
    return frame


def write_sample(sample: TargetSample, path: Union[str, Path]) -> Path:
    """Write a sample CSV at full precision so it reloads bit-identically"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sample_frame(sample).to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    logger.info(f"Wrote {sample.n} units to {path}")
    return path
