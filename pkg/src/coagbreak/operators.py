"""Sectional discretisation of the truncated coagulation / collisional breakage operator.

The unknown is the cell-averaged number density ``g``; ``N = g * widths`` is the
number of particles per cell, all of them sitting at the cell pivot.  The three
operators are quadratic in ``N``, so the whole right-hand side is one sparse
matrix acting on the flattened outer product ``N N^T``:

* coalescence births use fixed-pivot splitting over the two pivots bracketing
  ``x_i + x_j`` (number and mass exact);
* deaths remove both partners of every interacting pair;
* breakage births spread the fragments of each pair over the cells with a
  precomputed redistribution tensor ``b[l, i, j]`` whose mass is exactly
  ``x_i + x_j``.

Pairs whose aggregate exceeds the last pivot do not interact at all, the
discrete counterpart of the truncated kernel vanishing for ``mu + nu >= n``.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, DivergentMomentError
from .grid import Grid, pair_geometry
from .kernels import (
    CoalescenceProbability,
    ElasticDaughter,
    KernelModel,
    PowerLawDaughter,
    daughter_partial_moment,
    eval_kernel,
)

TENSOR_MODES = ("rescaled", "pivot")


@dataclass
class State:
    """Cell-averaged number density ``g`` at time ``t``."""

    g: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)

    def copy(self):
        return State(self.g.copy(), self.t)


@dataclass(eq=False)
class OperatorWorkspace:
    grid: Grid
    kernel: KernelModel
    prob: CoalescenceProbability
    daughter: object
    tensor_mode: str
    pairs: object
    K: np.ndarray
    KE: np.ndarray
    KEp: np.ndarray
    breakage: np.ndarray | None
    coal_birth: sp.csr_matrix
    break_birth: sp.csr_matrix
    death: sp.csr_matrix
    generator: sp.csr_matrix
    stats: dict = field(default_factory=dict)
    threads: int = 1
    _blocks: dict = field(default_factory=dict, repr=False)

    @property
    def size(self):
        return self.grid.size

    def fragment_counts(self):
        """Discrete fragment count ``sum_l b[l, i, j]`` per pair (zeros if no breakage)."""
        if self.breakage is None:
            return np.zeros_like(self.K)
        return self.breakage.sum(axis=0)

    def rhs(self, g, threads=None):
        """Time derivative of the cell densities ``g``."""
        g = np.asarray(g, dtype=float)
        if g.shape != (self.size,):
            raise ValueError(f"state has shape {g.shape}, workspace expects ({self.size},)")
        w = self.grid.widths
        N = g * w
        nn = np.outer(N, N).ravel()
        threads = self.threads if threads is None else threads
        if threads <= 1:
            dN = self.generator @ nn
        else:
            dN = np.concatenate(list(_pool(threads).map(lambda blk: blk @ nn, _row_blocks(self, threads))))
        return dN / w


_POOLS = {}


def _pool(threads):
    if threads not in _POOLS:
        _POOLS[threads] = ThreadPoolExecutor(max_workers=threads)
    return _POOLS[threads]


def _row_blocks(ws, threads):
    blocks = ws._blocks.get(threads)
    if blocks is None:
        bounds = np.linspace(0, ws.size, threads + 1).astype(int)
        blocks = [ws.generator[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        ws._blocks[threads] = blocks
    return blocks


def _cdf(daughter, q, x, xi, xj):
    return daughter_partial_moment(daughter, q, x, xi, xj)


def _rescaled_tensor(grid, daughter):
    x, L, R = grid.x, grid.left, grid.right
    m = x.size
    xi = np.broadcast_to(x[:, None], (m, m))
    xj = np.broadcast_to(x[None, :], (m, m))
    s = xi + xj
    lo = np.minimum(L[:, None, None], s)
    hi = np.minimum(R[:, None, None], s)
    b = _cdf(daughter, 0, hi, xi, xj) - _cdf(daughter, 0, lo, xi, xj)
    b = np.maximum(b, 0.0)
    mass = np.tensordot(x, b, axes=(0, 0))
    return b * (s / mass)


def _pivot_tensor(grid, daughter):
    """Two-pivot fragment placement keeping both fragment count and mass.

    Fragments between pivots ``x_k`` and ``x_{k+1}`` are split so that both
    moments are kept.  Fragments below the first pivot all go to it, which
    adds mass; that excess is removed by shifting a common fraction of the
    higher placements down to the first pivot.  When even that cannot work
    (``x_i + x_j < N x_0``), the pair produces ``(x_i + x_j)/x_0`` particles at
    the first pivot, still at least two.
    """
    x = grid.x
    m = x.size
    xi = np.broadcast_to(x[:, None], (m, m))
    xj = np.broadcast_to(x[None, :], (m, m))
    s = xi + xj
    b = np.zeros((m, m, m))
    for k in range(m - 1):
        lo = np.minimum(x[k], s)
        hi = np.minimum(x[k + 1], s)
        cnt = _cdf(daughter, 0, hi, xi, xj) - _cdf(daughter, 0, lo, xi, xj)
        mass = _cdf(daughter, 1, hi, xi, xj) - _cdf(daughter, 1, lo, xi, xj)
        dx = x[k + 1] - x[k]
        b[k] += (x[k + 1] * cnt - mass) / dx
        b[k + 1] += (mass - x[k] * cnt) / dx
    b = np.maximum(b, 0.0)
    low_cnt = _cdf(daughter, 0, np.minimum(x[0], s), xi, xj)
    low_mass = _cdf(daughter, 1, np.minimum(x[0], s), xi, xj)
    b[0] += low_cnt
    excess = low_cnt * x[0] - low_mass
    upper_cnt = b[1:].sum(axis=0)
    upper_mass = np.tensordot(x[1:], b[1:], axes=(0, 0))
    room = upper_mass - upper_cnt * x[0]
    feasible = room >= excess
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(feasible & (room > 0), excess / room, 0.0)
    b[0] += alpha * upper_cnt
    b[1:] *= 1.0 - alpha
    b[:, ~feasible] = 0.0
    b[0][~feasible] = (s / x[0])[~feasible]
    mass = np.tensordot(x, b, axes=(0, 0))
    return b * (s / mass)


def _elastic_tensor(grid):
    m = grid.size
    eye = np.eye(m)
    return eye[:, :, None] + eye[:, None, :]


def assemble(
    grid: Grid,
    kernel: KernelModel,
    prob: CoalescenceProbability,
    daughter,
    tensor_mode: str = "rescaled",
    threads: int = 1,
) -> OperatorWorkspace:
    """Precompute kernel matrices, pair placement and the breakage tensor."""
    if tensor_mode not in TENSOR_MODES:
        raise AssemblyError(f"unknown breakage tensor mode {tensor_mode!r}")
    t0 = time.perf_counter()
    x = grid.x
    m = x.size
    pairs = pair_geometry(grid)
    act = pairs.active

    K = np.asarray(eval_kernel(kernel, x[:, None], x[None, :]), dtype=float)
    E = np.asarray(prob(x[:, None], x[None, :]), dtype=float) * np.ones_like(K)
    KE = E * K
    KEp = (1.0 - E) * K

    breakage = None
    if np.any(KEp[act] > 0):
        try:
            if isinstance(daughter, ElasticDaughter):
                breakage = _elastic_tensor(grid)
            elif isinstance(daughter, PowerLawDaughter):
                maker = _pivot_tensor if tensor_mode == "pivot" else _rescaled_tensor
                breakage = maker(grid, daughter)
            else:
                raise AssemblyError(f"unsupported daughter model {daughter!r}")
        except DivergentMomentError as exc:
            raise AssemblyError(str(exc)) from exc
        breakage[:, ~act] = 0.0
        if not np.all(np.isfinite(breakage)) or np.any(breakage < 0):
            raise AssemblyError("breakage tensor has negative or non-finite entries")

    ii, jj = np.nonzero(act)
    cols = ii * m + jj
    lower = pairs.lower[ii, jj]
    w = pairs.weight[ii, jj]
    ke = KE[ii, jj]
    has_up = lower + 1 < m
    rows = np.concatenate([lower, (lower + 1)[has_up]])
    ccols = np.concatenate([cols, cols[has_up]])
    vals = np.concatenate([0.5 * w * ke, (0.5 * (1.0 - w) * ke)[has_up]])
    keep = vals != 0
    coal = sp.csr_matrix((vals[keep], (rows[keep], ccols[keep])), shape=(m, m * m))

    kd = K[ii, jj]
    keep = kd != 0
    death = sp.csr_matrix((kd[keep], (ii[keep], cols[keep])), shape=(m, m * m))

    if breakage is None:
        brk = sp.csr_matrix((m, m * m))
    else:
        flat = breakage.reshape(m, m * m) * (0.5 * KEp.ravel())[None, :]
        brk = sp.csr_matrix(flat)
    for mat in (coal, death, brk):
        mat.sum_duplicates()
        mat.sort_indices()
    gen = (coal + brk - death).tocsr()
    gen.sort_indices()

    wall = time.perf_counter() - t0
    nbytes = sum(a.nbytes for a in (K, KE, KEp))
    nbytes += 0 if breakage is None else breakage.nbytes
    for mat in (coal, brk, death, gen):
        nbytes += mat.data.nbytes + mat.indices.nbytes + mat.indptr.nbytes
    count_err = None
    if breakage is not None and isinstance(daughter, PowerLawDaughter) and act.any():
        # discrete fragment count against N; mass is exact, the count is not
        nominal = daughter.fragment_count()
        count_err = float(np.max(np.abs(breakage.sum(axis=0)[act] / nominal - 1.0)))
    stats = {
        "cells": int(m),
        "active_pairs": int(act.sum()),
        "coalescence_nnz": int(coal.nnz),
        "breakage_nnz": int(brk.nnz),
        "death_nnz": int(death.nnz),
        "generator_nnz": int(gen.nnz),
        "max_fragment_count_error": count_err,
        "memory_bytes": int(nbytes),
        "assembly_seconds": wall,
    }
    return OperatorWorkspace(
        grid, kernel, prob, daughter, tensor_mode, pairs, K, KE, KEp, breakage,
        coal, brk, death, gen, stats, max(1, int(threads)),
    )


def apply_rhs(ws: OperatorWorkspace, s) -> np.ndarray:
    g = s.g if isinstance(s, State) else s
    return ws.rhs(g)


def number_balance_rate(ws: OperatorWorkspace, s):
    """Split ``dM_0/dt`` into the coalescence loss and the breakage gain.

    Coalescence removes one particle per event; breakage turns two particles
    into ``sum_l b[l, i, j]`` fragments.
    """
    g = s.g if isinstance(s, State) else np.asarray(s, dtype=float)
    N = g * ws.grid.widths
    nn = np.outer(N, N)
    act = ws.pairs.active
    coag = -0.5 * np.sum(np.where(act, ws.KE, 0.0) * nn)
    if ws.breakage is None:
        return float(coag), 0.0
    counts = ws.fragment_counts()
    gain = 0.5 * np.sum(np.where(act, (counts - 2.0) * ws.KEp, 0.0) * nn)
    return float(coag), float(gain)
