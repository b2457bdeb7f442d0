"""Deterministic CSV writer."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class CsvArtifact:
    path: Path
    columns: tuple[str, ...]
    rows: int


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        # repr is the shortest string that round-trips, independent of locale
        return repr(v)
    return str(value)


def emit_csv(rows: Iterable[Mapping], schema: Sequence[str], path) -> CsvArtifact:
    """Write ``rows`` (mappings keyed by ``schema``) with a header line."""
    path = Path(path)
    schema = tuple(schema)
    rows = list(rows)
    for i, row in enumerate(rows):
        if set(row) != set(schema):
            raise ValueError(f"row {i} keys {sorted(row)} do not match schema {list(schema)}")
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in schema])
    return CsvArtifact(path=path, columns=schema, rows=len(rows))
