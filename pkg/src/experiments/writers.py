"""
Result writers
CSV and JSON emission with a fixed number of significant digits
"""

import json
import math
import sys
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.exceptions import InvalidParameterError

FORMATS = ("csv", "json")
SIGNIFICANT_DIGITS = 12


def round_significant(value, digits: int = SIGNIFICANT_DIGITS):
    """Round floats to `digits` significant digits; NaN becomes None, other values pass through"""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return None
        return float(f"{float(value):.{digits}g}")
    return value


def table_to_csv(table: pd.DataFrame, digits: int = SIGNIFICANT_DIGITS) -> str:
    """Header row, then one row per record; LF line endings, empty cells for missing values"""
    return table.to_csv(index=False, float_format=f"%.{digits}g", lineterminator="\n", na_rep="")


def table_to_json(table: pd.DataFrame, digits: int = SIGNIFICANT_DIGITS) -> str:
    records = [
        {column: round_significant(value, digits) for column, value in row.items()}
        for row in table.to_dict(orient="records")
    ]
    return json.dumps(records, indent=2, ensure_ascii=False) + "\n"


def render_table(table: pd.DataFrame, fmt: str = "csv", digits: int = SIGNIFICANT_DIGITS) -> str:
    if fmt not in FORMATS:
        raise InvalidParameterError(f"format must be one of {', '.join(FORMATS)}, got {fmt!r}")
    return table_to_csv(table, digits) if fmt == "csv" else table_to_json(table, digits)


def write_table(table: pd.DataFrame,
                fmt: str = "csv",
                out: Optional[Union[str, Path]] = None,
                digits: int = SIGNIFICANT_DIGITS):
    """
    Save a result table to a file, or to standard output when out is None

    Args:
        table: Rows to write
        fmt: "csv" or "json"
        out: Destination path
        digits: Significant digits of floating point values
    """
    text = render_table(table, fmt, digits)
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return

    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"✅ Saved {len(table)} rows to {path}")