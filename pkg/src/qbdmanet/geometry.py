"""Torus cell geometry: cell ids, equivalent classes, coverage, protocol-model distance.

A cell id is ``cx * m + cy`` with ``0 <= cx, cy < m``.
"""

from __future__ import annotations

import math

import numpy as np


def cell_id(cx, cy, m: int):
    return cx * m + cy


def torus_axis_distance(a, b, m: int):
    d = np.abs(np.asarray(a) - np.asarray(b)) % m
    return np.minimum(d, m - d)


def covers(c1, c2, m: int):
    """True where cell c2 lies in the 3x3 coverage block around cell c1."""
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    return ((torus_axis_distance(c1 // m, c2 // m, m) <= 1)
            & (torus_axis_distance(c1 % m, c2 % m, m) <= 1))


def coverage_cells(c: int, m: int) -> list[int]:
    cx, cy = divmod(c, m)
    out = {((cx + dx) % m) * m + (cy + dy) % m for dx in (-1, 0, 1) for dy in (-1, 0, 1)}
    return sorted(out)


def ec_index(c, m: int, alpha: int):
    """Equivalent class of a cell: (cx mod alpha, cy mod alpha) flattened."""
    c = np.asarray(c)
    return (c // m % alpha) * alpha + (c % m % alpha)


def ec_cells(m: int, alpha: int) -> list[list[int]]:
    """Cells of each of the alpha^2 equivalent classes, in ascending cell order."""
    classes: list[list[int]] = [[] for _ in range(alpha * alpha)]
    for c in range(m * m):
        classes[int(ec_index(c, m, alpha))].append(c)
    return classes


def cell_gap_distance(c1, c2, m: int):
    """Smallest Euclidean distance between points of two cells on the unit torus."""
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    gx = np.maximum(torus_axis_distance(c1 // m, c2 // m, m) - 1, 0)
    gy = np.maximum(torus_axis_distance(c1 % m, c2 % m, m) - 1, 0)
    return np.sqrt(gx * gx + gy * gy) / m


def interference_free(receiver_cell: int, other_tx_cell: int, m: int, delta: float) -> bool:
    """Protocol model: every other transmitter at least (1 + delta) r from the receiver."""
    r = math.sqrt(8.0) / m
    return bool(cell_gap_distance(receiver_cell, other_tx_cell, m) >= (1.0 + delta) * r - 1e-12)
