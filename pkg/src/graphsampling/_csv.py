"""Tiny CSV helpers shared by the I/O functions.

Floats are written with ``repr`` so that a write/read cycle is exact and
reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import os
from typing import Iterable, Sequence


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return _fmt(v.item())
    return str(v)


def format_rows(header: Sequence[str], rows: Iterable[Sequence], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_rows(
    path: str | os.PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence],
    comment: str | None = None,
) -> None:
    text = format_rows(header, rows, comment)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_rows(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValueError(f"{path}: empty CSV file") from None
    return header, [row for row in reader]
