"""CSV ingestion and result writing.

Input CSVs are UTF-8 with a header row; missing design entries are empty
cells or the literal "NA" (nothing else is treated as missing). The
response column must be fully observed and numeric.
"""

from __future__ import annotations

import csv

import numpy as np
import pandas as pd

from .data_model import Dataset
from .errors import SchemaMismatch

NA_VALUES = ["", "NA"]


def read_dataset(path, response: str) -> Dataset:
    """Load a CSV into a Dataset, using `response` as Y and every other
    column as a predictor. NaN design entries become masked-out values."""
    try:
        frame = pd.read_csv(path, na_values=NA_VALUES, keep_default_na=False,
                            encoding="utf-8")
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise SchemaMismatch(f"cannot parse CSV {path}: {exc}") from exc
    if response not in frame.columns:
        raise SchemaMismatch(f"response column {response!r} not in {list(frame.columns)}")
    y = pd.to_numeric(frame[response], errors="coerce").to_numpy(dtype=float)
    if np.any(np.isnan(y)):
        raise SchemaMismatch(f"response column {response!r} has missing or non-numeric values")
    predictors = [c for c in frame.columns if c != response]
    if not predictors:
        raise SchemaMismatch("no predictor columns in the CSV")
    cols = []
    for c in predictors:
        col = pd.to_numeric(frame[c], errors="coerce")
        bad = col.isna() & frame[c].notna() & (~frame[c].astype(str).isin(NA_VALUES))
        if bad.any():
            raise SchemaMismatch(f"column {c!r} has non-numeric entries")
        cols.append(col.to_numpy(dtype=float))
    X = np.column_stack(cols)
    nan_mask = np.isnan(X)
    mask = ~nan_mask if nan_mask.any() else None
    return Dataset(X, y, mask=mask, column_names=predictors)


def design_for_model(path, model) -> np.ndarray:
    """Design matrix for prediction, matched by column NAME to the model.

    Extra columns are ignored with a warning; missing ones raise
    SchemaMismatch listing them.
    """
    import warnings

    try:
        frame = pd.read_csv(path, na_values=NA_VALUES, keep_default_na=False,
                            encoding="utf-8")
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise SchemaMismatch(f"cannot parse CSV {path}: {exc}") from exc
    if model.column_names is None:
        raise SchemaMismatch("model carries no column names; cannot match by name")
    if model.response_name and model.response_name in frame.columns:
        frame = frame.drop(columns=[model.response_name])
    missing = [c for c in model.column_names if c not in frame.columns]
    if missing:
        raise SchemaMismatch(f"prediction CSV lacks columns: {missing}")
    extra = [c for c in frame.columns if c not in model.column_names]
    if extra:
        warnings.warn(f"ignoring unused columns: {extra}")
    X = np.column_stack([
        pd.to_numeric(frame[c], errors="coerce").to_numpy(dtype=float)
        for c in model.column_names
    ])
    return X


def write_rows_csv(path, rows, columns) -> None:
    """Write dict rows with a fixed column order; floats via repr so reruns
    with the same seed are byte-identical."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row.get(c)) for c in columns])


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_predictions_csv(path, predictions) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prediction"])
        for v in np.asarray(predictions, dtype=float):
            writer.writerow([repr(float(v))])
