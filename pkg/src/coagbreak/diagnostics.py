"""Moments, weighted norms, a priori bound certificates and solution distances.

All functions take either a :class:`~coagbreak.operators.State` or a bare
density array together with the grid it lives on.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError


def _g(s):
    return np.asarray(getattr(s, "g", s), dtype=float)


def default_exponents(sigma, extra=()):
    out = [-2.0 * sigma, -sigma, 0.0, 1.0]
    for q in extra:
        if float(q) not in out:
            out.append(float(q))
    return tuple(out)


def moment(s, grid, q: float) -> float:
    """``M_q = sum_i x_i^q g_i widths_i``."""
    g = _g(s)
    return float(np.sum(grid.x**q * g * grid.widths))


def s_norm(s, grid, sigma: float) -> float:
    """Norm of the weighted space ``L^1((1 + mu + mu^(-2 sigma)) dmu)``."""
    g = np.abs(_g(s))
    return float(np.sum((1.0 + grid.x + grid.x ** (-2.0 * sigma)) * g * grid.widths))


@dataclass
class MomentRecord:
    t: float
    values: dict

    @classmethod
    def of(cls, s, grid, t, exponents):
        return cls(float(t), {float(q): moment(s, grid, q) for q in exponents})

    def to_dict(self):
        return {"t": self.t, "values": {f"{q:g}": v for q, v in self.values.items()}}


@dataclass(frozen=True)
class BoundCertificate:
    """Constants of the a priori bound on the weighted norm over [0, T]."""

    a: float
    b: float
    P1: float
    P: float
    T: float
    g_in_norm: float

    def to_dict(self):
        return asdict(self)


def bound_certificate(g_in_norm, k, omega, sigma, eta_2sigma, T) -> BoundCertificate:
    """Gronwall bound for ``int (1 + mu + mu^(-2 sigma)) g^n dmu`` on [0, T].

    With ``a = k eta(2 sigma) 2^(2 omega) |g_in|`` and ``b = a |g_in| / 2``,
    ``P1 = e^(aT) |g_in| + (b/a)(e^(aT) - 1)`` and ``P = 2 P1 + 3 |g_in|``.
    ``sigma`` only enters through ``eta_2sigma``; it is accepted for symmetry
    with the other diagnostics.
    """
    if eta_2sigma is None:
        raise DomainError("eta(2 sigma) unavailable for this daughter distribution")
    if min(g_in_norm, k, eta_2sigma) < 0 or T < 0 or omega < 0:
        raise DomainError("certificate parameters must be nonnegative")
    a = k * eta_2sigma * 2.0 ** (2 * omega) * g_in_norm
    b = k * (eta_2sigma / 2.0) * 2.0 ** (2 * omega) * g_in_norm**2
    growth = math.exp(a * T) if a * T < 709 else math.inf
    # (b/a)(e^{aT} - 1) -> b T as a -> 0
    if a * T >= 709:
        tail = math.inf
    else:
        tail = (b / a) * math.expm1(a * T) if a > 0 else b * T
    P1 = growth * g_in_norm + tail
    return BoundCertificate(a, b, P1, 2.0 * P1 + 3.0 * g_in_norm, float(T), float(g_in_norm))


@dataclass
class BoundCheck:
    passed: bool
    margins: np.ndarray
    times: np.ndarray
    first_violation: float | None

    @property
    def min_margin(self):
        return float(np.min(self.margins)) if self.margins.size else math.inf

    def to_dict(self):
        return {
            "passed": self.passed,
            "min_margin": self.min_margin,
            "first_violation": self.first_violation,
            "times": [float(t) for t in self.times],
            "margins": [float(m) for m in self.margins],
        }


def check_bound(traj, cert: BoundCertificate, grid, sigma: float) -> BoundCheck:
    """Margin ``P(T) - |g(t)|_S`` at each checkpoint of ``traj``."""
    times = np.asarray([s.t for s in traj.states])
    norms = np.array([s_norm(s, grid, sigma) for s in traj.states])
    margins = cert.P - norms
    bad = np.nonzero(margins < 0)[0]
    first = float(times[bad[0]]) if bad.size else None
    return BoundCheck(not bad.size, margins, times, first)


def tail_mass(s, grid, lam: float, sigma: float, m1_initial: float | None = None):
    """``sum_{x_i >= lam} (1 + x_i^-sigma) g_i widths_i`` and its mass majorant.

    The majorant ``(1/lam + lam^-(sigma+1)) M_1(g_in)`` follows from mass
    conservation; pass ``m1_initial`` to get it, else ``None`` is returned in
    its place.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    g = _g(s)
    sel = grid.x >= lam
    val = float(np.sum((1.0 + grid.x[sel] ** -sigma) * g[sel] * grid.widths[sel]))
    bound = None
    if m1_initial is not None:
        bound = (1.0 / lam + (1.0 / lam) ** (sigma + 1)) * m1_initial
    return val, bound


def weighted_distance(g, h, grid, sigma: float) -> float:
    """``sum (1 + x_i^-sigma) |g_i - h_i| widths_i``."""
    d = np.abs(_g(g) - _g(h))
    return float(np.sum((1.0 + grid.x**-sigma) * d * grid.widths))


def contraction_rate(g_sup: float, h_sup: float, k: float, eta_sigma: float) -> float:
    """Growth rate ``C`` in the Gronwall estimate ``Xi(t) <= Xi(0) e^(C t)``."""
    return k * (2 * g_sup + 2 * h_sup + eta_sigma * g_sup + 0.5 * eta_sigma * h_sup)
