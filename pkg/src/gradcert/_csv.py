"""Deterministic CSV formatting shared by trace exports."""

from __future__ import annotations

import csv
import io
import os


def fmt(value) -> str:
    """17 significant digits, '.' decimal separator, ints kept integral."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def write_rows(target, header: list[str], rows) -> None:
    """Write to a path or an open text handle using '\\n' line endings."""
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            write_rows(fh, header, rows)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def to_string(header: list[str], rows) -> str:
    buf = io.StringIO()
    write_rows(buf, header, rows)
    return buf.getvalue()
