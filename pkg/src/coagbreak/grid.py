"""Geometric cell partition of the truncated volume domain [1/n, n]."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

OUTSIDE = -1


@dataclass(frozen=True, eq=False)
class Grid:
    """Log-uniform mesh on [1/n, n].

    Attributes
    ----------
    n : float
        Truncation parameter; the domain is [1/n, n).
    cells_per_decade : int
        Resolution used to pick the cell count.
    edges : ndarray, shape (M+1,)
        Cell edges, ``edges[0] == 1/n`` and ``edges[-1] == n``.
    x : ndarray, shape (M,)
        Pivot (representative) volumes, the geometric mean of each cell's edges.
    widths : ndarray, shape (M,)
        Cell widths, used as midpoint quadrature weights.
    """

    n: float
    cells_per_decade: int
    edges: np.ndarray
    x: np.ndarray
    widths: np.ndarray

    @property
    def size(self):
        return self.x.size

    @property
    def left(self):
        return self.edges[:-1]

    @property
    def right(self):
        return self.edges[1:]

    @property
    def ratio(self):
        return (self.n * self.n) ** (1.0 / self.size)

    def summary(self):
        return {
            "n": float(self.n),
            "cells_per_decade": int(self.cells_per_decade),
            "cells": int(self.size),
            "edge_ratio": float(self.ratio),
            "edges": [float(e) for e in self.edges],
        }


def build_grid(n: float, cells_per_decade: int = 8) -> Grid:
    if not n > 1 or not math.isfinite(n):
        raise DomainError("truncation parameter n must exceed 1")
    if int(cells_per_decade) != cells_per_decade or cells_per_decade < 1:
        raise DomainError("cells_per_decade must be a positive integer")
    # round() guards against log10(10**k) landing a hair above an integer
    m = math.ceil(round(2 * math.log10(n) * cells_per_decade, 9))
    edges = np.geomspace(1.0 / n, n, m + 1)
    edges[0], edges[-1] = 1.0 / n, float(n)
    x = np.sqrt(edges[:-1] * edges[1:])
    for a in (edges, x):
        a.setflags(write=False)
    widths = np.diff(edges)
    widths.setflags(write=False)
    return Grid(float(n), int(cells_per_decade), edges, x, widths)


def locate_cell(grid: Grid, mu):
    """Index ``i`` with ``left_i <= mu < right_i``, or ``OUTSIDE`` (-1).

    The top edge ``n`` itself is outside, as is anything below ``1/n``.
    """
    arr = np.asarray(mu, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("volume must be positive")
    idx = np.searchsorted(grid.edges, arr, side="right") - 1
    idx = np.where((arr < grid.edges[0]) | (arr >= grid.edges[-1]), OUTSIDE, idx)
    return int(idx) if idx.ndim == 0 else idx


@dataclass(frozen=True, eq=False)
class PairMap:
    """Fixed-pivot placement of every aggregate ``x_i + x_j``.

    ``active[i, j]`` marks pairs that interact at all.  For those, the
    aggregate goes to pivot ``lower[i, j]`` with weight ``weight[i, j]`` and
    to ``lower + 1`` with ``1 - weight``; when the sum lands exactly on the
    last pivot, ``weight`` is 1 and no upper cell exists.
    """

    active: np.ndarray
    lower: np.ndarray
    weight: np.ndarray
    sums: np.ndarray


def pair_geometry(grid: Grid) -> PairMap:
    x = grid.x
    s = x[:, None] + x[None, :]
    # sums beyond the last pivot cannot be split over two pivots, so those
    # pairs are cut just like pairs with sum >= n
    active = (s <= x[-1]) & (s < grid.n)
    lower = np.clip(np.searchsorted(x, s, side="right") - 1, 0, x.size - 1)
    upper = np.minimum(lower + 1, x.size - 1)
    xl, xu = x[lower], x[upper]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(upper > lower, (xu - s) / (xu - xl), 1.0)
    w = np.where(active, np.clip(w, 0.0, 1.0), 0.0)
    lower = np.where(active, lower, -1)
    for a in (active, lower, w, s):
        a.setflags(write=False)
    return PairMap(active, lower, w, s)
