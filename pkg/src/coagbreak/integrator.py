"""Adaptive explicit time stepping of the truncated system.

The stepper is the Bogacki-Shampine 3(2) pair with first-same-as-last reuse
and cubic Hermite dense output, so checkpoints never perturb step selection.
Every accepted state is nonnegative: undershoot at round-off level is zeroed,
anything larger forces a rejection and a halved step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .diagnostics import MomentRecord, default_exponents, moment
from .errors import DomainError, SolverError, StiffnessError
from .grid import Grid
from .operators import OperatorWorkspace, State

logger = logging.getLogger(__name__)

INITIAL_PRESETS = ("exponential", "gamma", "monodisperse", "table")


@dataclass(frozen=True)
class SolverConfig:
    """Step control settings.

    ``negativity_clip`` is relative: components in
    ``[-negativity_clip * max(state), 0)`` are zeroed after a step, anything
    more negative rejects it.
    """

    t_end: float = 1.0
    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = math.inf
    negativity_clip: float = 1e-14
    output_times: Optional[tuple] = None
    n_outputs: int = 11

    def __post_init__(self):
        if not self.t_end >= 0:
            raise DomainError("t_end must be nonnegative")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise DomainError("0 < dt_min <= dt_init <= dt_max required")
        if self.negativity_clip < 0:
            raise DomainError("negativity_clip must be nonnegative")
        if self.output_times is not None:
            object.__setattr__(self, "output_times", tuple(float(t) for t in self.output_times))

    def checkpoints(self):
        if self.output_times is None:
            ts = np.linspace(0.0, self.t_end, max(2, self.n_outputs)) if self.t_end > 0 else [0.0]
        else:
            ts = [t for t in self.output_times if 0 <= t <= self.t_end]
        ts = sorted(set([0.0, float(self.t_end)] + [float(t) for t in ts]))
        return np.array(ts)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    moments: list
    mass_drift: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]

    def array(self):
        return np.vstack([s.g for s in self.states])


# ----------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class InitialCondition:
    """Named initial density.

    ``exponential``: ``amplitude * exp(-mu / scale)``;
    ``gamma``: ``amplitude * mu**(shape-1) * exp(-mu / scale)``;
    ``monodisperse``: height ``amplitude`` on the single cell containing
    ``volume``;
    ``table``: log-linear interpolation of ``(volumes, densities)``, zero
    outside the tabulated range.
    """

    preset: str = "exponential"
    amplitude: float = 1.0
    scale: float = 1.0
    shape: float = 2.0
    volume: float = 1.0
    volumes: tuple = ()
    densities: tuple = ()

    def __post_init__(self):
        if self.preset not in INITIAL_PRESETS:
            raise DomainError(f"unknown initial preset {self.preset!r}")
        if self.amplitude < 0:
            raise DomainError("initial amplitude must be nonnegative")
        if self.preset == "table":
            v = np.asarray(self.volumes, dtype=float)
            d = np.asarray(self.densities, dtype=float)
            if v.size < 2 or v.shape != d.shape:
                raise DomainError("table needs matching volume/density columns")
            if np.any(v <= 0) or np.any(np.diff(v) <= 0):
                raise DomainError("table volumes must be positive and increasing")
            if np.any(d < 0):
                raise DomainError("initial density samples must be nonnegative")

    def __call__(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.preset == "exponential":
            return self.amplitude * np.exp(-mu / self.scale)
        if self.preset == "gamma":
            return self.amplitude * mu ** (self.shape - 1) * np.exp(-mu / self.scale)
        if self.preset == "table":
            lv = np.log(np.asarray(self.volumes, dtype=float))
            return np.interp(np.log(mu), lv, np.asarray(self.densities, dtype=float), left=0.0, right=0.0)
        raise DomainError("monodisperse data is defined per cell; use truncate_initial")


def truncate_initial(g_in, grid: Grid, rtol: float = 1e-10) -> State:
    """Cell averages of ``g_in`` over the grid; zero outside [1/n, n].

    ``g_in`` is a callable density, an :class:`InitialCondition`, or a pair of
    arrays ``(volumes, densities)`` taken as a table.
    """
    if isinstance(g_in, tuple) and len(g_in) == 2 and not callable(g_in):
        g_in = InitialCondition("table", volumes=tuple(g_in[0]), densities=tuple(g_in[1]))
    if isinstance(g_in, InitialCondition) and g_in.preset == "monodisperse":
        g = np.zeros(grid.size)
        i = int(np.searchsorted(grid.edges, g_in.volume, side="right") - 1)
        if 0 <= i < grid.size:
            g[i] = g_in.amplitude
        return State(g, 0.0)

    probe = np.concatenate([grid.edges, grid.x])
    if np.any(np.asarray(g_in(probe)) < 0):
        raise DomainError("initial density must be nonnegative")
    breaks = None
    if isinstance(g_in, InitialCondition) and g_in.preset == "table":
        breaks = np.asarray(g_in.volumes, dtype=float)
    g = np.empty(grid.size)
    for i, (a, b) in enumerate(zip(grid.left, grid.right)):
        pts = None
        if breaks is not None:
            inside = breaks[(breaks > a) & (breaks < b)]
            pts = inside if inside.size else None
        val, _ = integrate.quad(lambda m: float(g_in(m)), a, b, epsabs=0.0, epsrel=rtol,
                                limit=200, points=pts)
        g[i] = max(val, 0.0) / (b - a)
    return State(g, 0.0)


# ----------------------------------------------------------------------------
# stepping

_A21 = 0.5
_A32 = 0.75
_B = (2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0)
_E = (-5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0)


def _bs3(f, y, h, k1):
    k2 = f(y + h * _A21 * k1)
    k3 = f(y + h * _A32 * k2)
    y1 = y + h * (_B[0] * k1 + _B[1] * k2 + _B[2] * k3)
    k4 = f(y1)
    err = h * (_E[0] * k1 + _E[1] * k2 + _E[2] * k3 + _E[3] * k4)
    return y1, k4, err


def _error_norm(err, y0, y1, cfg):
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2))) if err.size else 0.0


@dataclass
class _Attempt:
    y: np.ndarray
    k_end: np.ndarray
    error: float
    accepted: bool
    negative: bool


def _attempt(ws, y, h, cfg, k1):
    f = ws.rhs
    y1, k4, err = _bs3(f, y, h, k1)
    enorm = _error_norm(err, y, y1, cfg)
    clip = cfg.negativity_clip * (float(np.max(y)) if y.size else 0.0)
    lowest = float(np.min(y1)) if y1.size else 0.0
    negative = lowest < -clip
    accepted = enorm <= 1.0 and not negative and np.all(np.isfinite(y1))
    if accepted and lowest < 0:
        y1 = np.where(y1 < 0, 0.0, y1)
        k4 = f(y1)
    return _Attempt(y1, k4, enorm, bool(accepted), bool(negative))


def step(ws: OperatorWorkspace, s: State, dt: float, cfg: SolverConfig):
    """One embedded step; returns ``(state, error_estimate, accepted)``.

    On rejection the returned state is the unmodified input.
    """
    if not cfg.dt_min <= dt <= cfg.dt_max:
        raise DomainError("dt outside [dt_min, dt_max]")
    k1 = ws.rhs(s.g)
    att = _attempt(ws, s.g, dt, cfg, k1)
    if not att.accepted:
        return s.copy(), att.error, False
    return State(att.y, s.t + dt), att.error, True


def _hermite(y0, y1, f0, f1, h, theta):
    d = y1 - y0
    return (1 - theta) * y0 + theta * y1 + theta * (theta - 1) * (
        (1 - 2 * theta) * d + (theta - 1) * h * f0 + theta * h * f1
    )


def run(
    ws: OperatorWorkspace,
    initial: State,
    cfg: SolverConfig,
    extra_exponents: Sequence[float] = (),
    progress: Optional[Callable] = None,
) -> Trajectory:
    """Integrate from ``initial`` to ``cfg.t_end`` and record checkpoints."""
    grid = ws.grid
    sigma = ws.kernel.sigma
    exps = default_exponents(sigma, extra_exponents)
    outs = cfg.checkpoints()
    y = np.asarray(initial.g, dtype=float).copy()
    if y.shape != (grid.size,):
        raise DomainError("initial state does not match the grid")
    if np.any(y < 0):
        raise DomainError("initial state must be nonnegative")
    m1_0 = moment(y, grid, 1.0)

    states, moments, drift = [], [], []

    def emit(t, g):
        g = np.where(g < 0, 0.0, g)
        states.append(State(g, float(t)))
        moments.append(MomentRecord.of(g, grid, float(t), exps))
        m1 = moment(g, grid, 1.0)
        drift.append(0.0 if m1_0 == 0 else abs(m1 - m1_0) / m1_0)

    emit(0.0, y)
    stats = {"accepted": 0, "rejected": 0, "negativity_rejections": 0,
             "dt_min_used": math.inf, "dt_max_used": 0.0, "rhs_evaluations": 1}
    t = 0.0
    t_end = float(cfg.t_end)
    nxt = 1
    k1 = ws.rhs(y)
    dt = min(cfg.dt_init, cfg.dt_max)
    while t < t_end and nxt < len(outs):
        h = min(dt, t_end - t)
        att = _attempt(ws, y, h, cfg, k1)
        stats["rhs_evaluations"] += 3
        if not np.all(np.isfinite(att.y)) or not math.isfinite(att.error):
            raise SolverError(
                f"non-finite state at t={t:.6g}, dt={h:.3g}",
                dump={"t": t, "dt": h, "state": y.tolist()},
            )
        if att.accepted:
            t_new = t + h if h < t_end - t else t_end
            while nxt < len(outs) and outs[nxt] <= t_new:
                if outs[nxt] == t_new:
                    emit(t_new, att.y)
                else:
                    theta = (outs[nxt] - t) / h
                    emit(outs[nxt], _hermite(y, att.y, k1, att.k_end, h, theta))
                nxt += 1
            stats["accepted"] += 1
            stats["dt_min_used"] = min(stats["dt_min_used"], h)
            stats["dt_max_used"] = max(stats["dt_max_used"], h)
            t, y, k1 = t_new, att.y, att.k_end
            fac = 5.0 if att.error == 0 else min(5.0, max(0.2, 0.9 * att.error ** (-1.0 / 3.0)))
            dt = min(h * fac, cfg.dt_max)
            if progress is not None:
                progress(t, y)
        else:
            stats["rejected"] += 1
            if att.negative:
                stats["negativity_rejections"] += 1
                dt = 0.5 * h
            else:
                dt = h * max(0.2, 0.9 * att.error ** (-1.0 / 3.0))
            if dt < cfg.dt_min:
                raise StiffnessError(
                    f"step size {dt:.3g} fell below dt_min={cfg.dt_min:.3g} at t={t:.6g} "
                    f"(error {att.error:.3g}, negative={att.negative})"
                )
    if stats["accepted"] == 0:
        stats["dt_min_used"] = 0.0
    stats["max_mass_drift"] = float(max(drift))
    return Trajectory(np.array([s.t for s in states]), states, moments, np.array(drift), stats)
