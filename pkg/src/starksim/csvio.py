"""Small CSV helpers shared by the simulation and analysis outputs.

All files are RFC-4180 style with ``\n`` line endings, ``.`` decimal
separator, and floats at 17 significant digits so runs reproduce
byte-identically.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["format_value", "read_table", "write_table"]


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(format_value(v) for v in row) + "\n")
    return path


def read_table(path: str | Path, expected_header: Sequence[str] | None = None) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        if expected_header is not None and header != list(expected_header):
            raise ValueError(f"{path}: unexpected header {header!r}, want {list(expected_header)!r}")
        return [row for row in reader if row]
