"""Slow reference implementations used as test oracles.

Written with plain loops and scipy quadrature, sharing nothing with the
vectorised assembly beyond the grid and the model objects.
"""
import numpy as np
from scipy import integrate


def in_domain(xi, xj, grid):
    s = xi + xj
    return s <= grid.x[-1] and s < grid.n


def split(s, x):
    """Fixed-pivot split of ``s``: list of (cell, fraction)."""
    for k in range(len(x)):
        if s == x[k]:
            return [(k, 1.0)]
        if k + 1 < len(x) and x[k] < s < x[k + 1]:
            w = (x[k + 1] - s) / (x[k + 1] - x[k])
            return [(k, w), (k + 1, 1.0 - w)]
    raise ValueError("sum outside pivot range")


def rescaled_tensor_quad(grid, daughter):
    """Fragment counts per cell by quadrature, rescaled to the pair mass."""
    x = grid.x
    m = x.size
    b = np.zeros((m, m, m))
    for i in range(m):
        for j in range(m):
            s = x[i] + x[j]
            for l in range(m):
                lo, hi = grid.left[l], min(grid.right[l], s)
                if hi > lo:
                    val, _ = integrate.quad(lambda u: daughter.density(u, x[i], x[j]), lo, hi,
                                            epsabs=0, epsrel=1e-13, limit=200)
                    b[l, i, j] = val
            mass = sum(x[l] * b[l, i, j] for l in range(m))
            b[:, i, j] *= s / mass
    return b


def naive_rhs(grid, K, E, b, g):
    """Triple loop over (l, i, j)."""
    x, w = grid.x, grid.widths
    m = x.size
    N = [g[i] * w[i] for i in range(m)]
    out = np.zeros(m)
    for l in range(m):
        acc = 0.0
        for i in range(m):
            for j in range(m):
                if not in_domain(x[i], x[j], grid):
                    continue
                rate = K[i][j] * N[i] * N[j]
                for cell, frac in split(x[i] + x[j], x):
                    if cell == l:
                        acc += 0.5 * frac * E[i][j] * rate
                if b is not None:
                    acc += 0.5 * b[l][i][j] * (1.0 - E[i][j]) * rate
                if i == l:
                    acc -= rate
        out[l] = acc / w[l]
    return out


def naive_terms_scale(grid, K, g):
    """Largest single death term, the natural scale for round-off checks."""
    N = g * grid.widths
    return float(np.max(np.abs(np.outer(N, N) * K)) / grid.widths.min()) + 1e-300
