"""CSV output for simulation traces and bound sweeps."""

import csv
import math
import numbers
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

from app.core.logging_config import get_logger

logger = get_logger(__name__)

NA = "NA"


def format_value(value: Any) -> str:
    """
    Render one CSV cell.

    None and non-finite floats become "NA"; floats use repr() so the same
    value always prints the same way.
    """
    if value is None:
        return NA
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(value)
    if isinstance(value, numbers.Real):
        number = float(value)
        if not math.isfinite(number):
            logger.warning(f"Non-finite value {number} written as {NA}")
            return NA
        return repr(number)
    return str(value)


def write_csv_atomic(path: Union[str, Path], columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """
    Write rows to `path` via a temp file in the same directory and os.replace.

    Args:
        path: Destination file
        columns: Header, in output order
        rows: Dicts keyed by column; missing keys are written as NA

    Returns:
        Path: The destination path
    """
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)

    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    count = 0
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row.get(col)) for col in columns])
                count += 1
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise

    logger.info(f"Wrote {count} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Rows of a written CSV as string dicts."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
