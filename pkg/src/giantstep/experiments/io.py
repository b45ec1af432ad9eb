"""Deterministic CSV/JSON output and the sweep-cell thread pool."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np


def fmt_value(value) -> str:
    """Round-trip formatting: ints verbatim, floats via repr (shortest exact)."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    """Write rows (iterables) with a fixed header; '\n' line endings.

    Rows are written in the order given; callers sort their cells so a
    rerun with the same config and seeds is byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def thread_count() -> int:
    env = os.environ.get("GIANTSTEP_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def parallel_map(fn, cells):
    """Run fn over cells in a work-stealing pool; results in input order.

    Each cell must be self-contained (own RNG substream); output order is
    independent of scheduling, so downstream CSVs stay deterministic.
    """
    cells = list(cells)
    workers = min(thread_count(), max(1, len(cells)))
    if workers == 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))
