#!/usr/bin/env python3
"""
CSV helpers for sample dumps, curves and reports

All tabular artifacts are written with a header row and "\n" line endings so
two runs with the same seed produce byte-identical files.
"""

import csv
import os
from typing import Iterable, List, Sequence

import numpy as np

from utils.errors import ArgumentError, CorruptionError


def format_value(value) -> str:
    """Format a cell; floats use the shortest repr that round-trips"""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Write a CSV file and return the number of data rows"""
    out_dir = os.path.dirname(path)
    if out_dir and not os.path.exists(out_dir):
        os.makedirs(out_dir)

    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    return count


def write_points(path: str, points: np.ndarray) -> int:
    """Dump an N×2 point cloud with header x,y"""
    return write_rows(path, ['x', 'y'], points.tolist())


def read_points(path: str) -> np.ndarray:
    """Load an N×2 point cloud written by write_points

    Raises CorruptionError naming path:line for a row that is not two numbers.
    """
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ['x', 'y']:
            raise ArgumentError(f"{path}: expected header x,y, got {header}")
        rows: List[List[float]] = []
        for row in reader:
            if len(row) != 2:
                raise CorruptionError(f"{path}:{reader.line_num}: expected 2 columns, got {len(row)}")
            try:
                rows.append([float(row[0]), float(row[1])])
            except ValueError:
                raise CorruptionError(f"{path}:{reader.line_num}: non-numeric value in {row}")
    return np.asarray(rows, dtype=np.float32).reshape(-1, 2)
