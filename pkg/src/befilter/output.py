"""CSV output with full double precision."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Sequence


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        v = float(v)
        return format(v, ".17g") if math.isfinite(v) else str(v)
    return str(v)


def write_csv(target, rows: Iterable, schema: Sequence[str], footer: str | None = None) -> int:
    """Write ``rows`` under a header row ``schema``.

    ``target`` is a path or a text stream. Rows are mappings keyed by the
    schema or sequences of matching length. Floats use 17 significant
    digits, so parsing the file back reproduces them exactly. An optional
    ``footer`` is written as a trailing ``#`` comment line (used to flag
    incomplete runs). Returns the number of data rows.

    Raises
    ------
    ValueError
        If a row does not match the schema.
    """
    schema = list(schema)
    if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
        with open(target, "w", newline="") as fh:
            return write_csv(fh, rows, schema, footer)
    w = csv.writer(target, lineterminator="\n")
    w.writerow(schema)
    n = 0
    for row in rows:
        if isinstance(row, dict):
            missing = [k for k in schema if k not in row]
            if missing:
                raise ValueError(f"row lacks columns {missing}")
            values = [row[k] for k in schema]
        else:
            values = list(row)
            if len(values) != len(schema):
                raise ValueError(f"row has {len(values)} values, schema has {len(schema)}")
        w.writerow([format_value(v) for v in values])
        n += 1
    if footer:
        target.write(f"# {footer}\n")
    return n


def read_csv(source) -> tuple[list, list]:
    """Parse a file written by :func:`write_csv`: ``(header, rows)``.

    Numeric fields are converted to float; comment lines are skipped.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="") as fh:
            return read_csv(io.StringIO(fh.read()))
    lines = [ln for ln in source.read().splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = []
    for rec in reader:
        out = []
        for v in rec:
            try:
                out.append(float(v))
            except ValueError:
                out.append(v)
        rows.append(out)
    return header, rows
