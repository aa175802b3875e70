"""Experiment suites built on the solver.

* :func:`truncation_sweep` runs one scenario at increasing truncation ``n`` and
  measures how far successive final states are apart.
* :func:`analytic_compare` checks reductions with known behaviour: constant
  kernel pure coagulation against its closed form, elastic collisions against
  coagulation with a halved kernel, and pure breakage.
* :func:`uniqueness_experiment` perturbs the initial data and tracks the
  weighted distance against its Gronwall envelope.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .diagnostics import contraction_rate, moment, s_norm, weighted_distance
from .errors import ConfigError, DomainError
from .grid import Grid, build_grid
from .integrator import InitialCondition, SolverConfig, run, truncate_initial
from .kernels import (
    CoalescenceProbability,
    ElasticDaughter,
    KernelModel,
    PowerLawDaughter,
    check_assumptions,
    eta,
)
from .operators import assemble

logger = logging.getLogger(__name__)

ANALYTIC_SCENARIOS = ("constant_kernel_pure_coag", "elastic_reduction", "pure_breakage")

# verdict thresholds
MASS_DRIFT_TOL = 1e-8
CONTRACTION_SLACK = 0.05
ANALYTIC_L1_TOL = 0.02
ANALYTIC_M0_TOL = 0.01


@dataclass(frozen=True)
class Scenario:
    """Everything needed for one solver run."""

    kernel: KernelModel = KernelModel("kinetic_theory", 1.0, 0.2, 0.2)
    prob: CoalescenceProbability = CoalescenceProbability("constant", 0.5)
    daughter: object = PowerLawDaughter(-0.5)
    n: float = 100.0
    cells_per_decade: int = 8
    initial: InitialCondition = InitialCondition("exponential")
    solver: SolverConfig = SolverConfig(t_end=5.0)
    tensor_mode: str = "rescaled"

    def describe(self):
        d = self.daughter
        return {
            "kernel": {"variant": self.kernel.variant, "k": self.kernel.k, "omega": self.kernel.omega,
                       "sigma": self.kernel.sigma, "bound_k": self.kernel.bound_k},
            "probability": {"variant": self.prob.variant, "value": self.prob.value},
            "daughter": {"kind": d.kind, "theta": getattr(d, "theta", None),
                         "tensor_mode": self.tensor_mode},
            "grid": {"n": self.n, "cells_per_decade": self.cells_per_decade},
            "initial": {"preset": self.initial.preset, "amplitude": self.initial.amplitude,
                        "scale": self.initial.scale, "shape": self.initial.shape,
                        "volume": self.initial.volume, "volumes": list(self.initial.volumes),
                        "densities": list(self.initial.densities)},
            "solver": {k: _jsonable(v) for k, v in self.solver.__dict__.items()},
        }


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, tuple):
        return list(v)
    return v


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class RunResult:
    scenario: Scenario
    grid: Grid
    workspace: object
    initial: object
    trajectory: object
    wall_seconds: float


def simulate(sc: Scenario, threads: int = 1) -> RunResult:
    t0 = time.perf_counter()
    grid = build_grid(sc.n, sc.cells_per_decade)
    ws = assemble(grid, sc.kernel, sc.prob, sc.daughter, sc.tensor_mode, threads=threads)
    init = truncate_initial(sc.initial, grid)
    traj = run(ws, init, sc.solver)
    return RunResult(sc, grid, ws, init, traj, time.perf_counter() - t0)


@dataclass
class StudyReport:
    kind: str
    sweep: list
    runs: list
    metrics: dict
    verdicts: dict
    thresholds: dict
    config_hash: str
    notes: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.verdicts.values())

    def to_dict(self):
        return {
            "kind": self.kind,
            "config_hash": self.config_hash,
            "sweep": self.sweep,
            "runs": self.runs,
            "metrics": self.metrics,
            "thresholds": self.thresholds,
            "verdicts": self.verdicts,
            "passed": self.passed,
            "notes": self.notes,
        }


def _summary(res: RunResult):
    tr = res.trajectory
    g = res.grid
    fin = tr.final
    return {
        "n": g.n,
        "cells": g.size,
        "t_end": float(tr.times[-1]),
        "M0_final": moment(fin, g, 0.0),
        "M1_final": moment(fin, g, 1.0),
        "max_mass_drift": float(tr.stats["max_mass_drift"]),
        "accepted_steps": tr.stats["accepted"],
        "rejected_steps": tr.stats["rejected"],
        "wall_seconds": res.wall_seconds,
    }


# ----------------------------------------------------------------------------
# truncation convergence


def restrict(g_fine, fine: Grid, coarse: Grid) -> np.ndarray:
    """Conservative transfer of a fine-grid density onto ``coarse``.

    The fine density is taken piecewise constant; every coarse cell receives
    the integral over its overlap with each fine cell, so the number content
    of the common domain is preserved exactly.
    """
    g_fine = np.asarray(getattr(g_fine, "g", g_fine), dtype=float)
    lo = np.maximum(fine.left[None, :], coarse.left[:, None])
    hi = np.minimum(fine.right[None, :], coarse.right[:, None])
    overlap = np.clip(hi - lo, 0.0, None)
    return (overlap @ g_fine) / coarse.widths


def truncation_sweep(base: Scenario, n_values: Sequence[float], workers: int = 1) -> StudyReport:
    """Run ``base`` for each ``n`` and compare successive final states.

    Distances are taken on the coarser grid of each pair after restricting the
    finer solution onto it.  Strict decrease of successive distances is a
    desk-scale proxy for convergence; no rate is asserted.
    """
    n_values = [float(n) for n in n_values]
    if len(n_values) < 3:
        raise ConfigError("truncation sweep needs at least three values of n")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ConfigError("truncation values must be strictly increasing")
    scenarios = [replace(base, n=n) for n in n_values]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(simulate, sc) for sc in scenarios]
    results, failures = [], []
    for n, fut in zip(n_values, futures):
        try:
            results.append(fut.result())
        except Exception as exc:  # partial report carries the failure
            failures.append({"n": n, "error": f"{type(exc).__name__}: {exc}"})
            results.append(None)

    sigma = base.kernel.sigma
    dists = []
    for a, b in zip(results, results[1:]):
        if a is None or b is None:
            dists.append(None)
            continue
        fine_on_coarse = restrict(b.trajectory.final, b.grid, a.grid)
        dists.append(weighted_distance(a.trajectory.final, fine_on_coarse, a.grid, sigma))
    runs = [_summary(r) if r is not None else f for r, f in zip(results, _pad(failures, n_values, results))]
    ok = all(d is not None for d in dists)
    decreasing = ok and all(d2 < d1 for d1, d2 in zip(dists, dists[1:]))
    mass_ok = ok and all(r.trajectory.stats["max_mass_drift"] <= MASS_DRIFT_TOL for r in results)
    # empirical decay exponent of the distances in n; reported, never asserted
    rates = []
    for k in range(len(dists) - 1):
        d1, d2 = dists[k], dists[k + 1]
        if d1 and d2:
            rates.append(math.log(d1 / d2) / math.log(n_values[k + 2] / n_values[k + 1]))
        else:
            rates.append(None)
    rep = StudyReport(
        kind="truncation",
        sweep=n_values,
        runs=runs,
        metrics={"successive_distances": dists, "empirical_rates": rates},
        verdicts={"distances_strictly_decreasing": bool(decreasing), "mass_conserved": bool(mass_ok)},
        thresholds={"mass_drift": MASS_DRIFT_TOL},
        config_hash=config_hash({"base": base.describe(), "n": n_values}),
        notes=["monotone decrease is a pragmatic proxy; no convergence rate in n is asserted"]
        + [f"run failed: {f}" for f in failures],
    )
    rep.series = {"n": n_values[1:], "distance": dists}
    return rep


def _pad(failures, n_values, results):
    by_n = {f["n"]: f for f in failures}
    return [by_n.get(n) for n in n_values]


# ----------------------------------------------------------------------------
# analytic reductions


def constant_kernel_reference(mu, t):
    """Exact density for kernel 1, pure coalescence, ``g_in = exp(-mu)``."""
    c = t + 2.0
    return 4.0 / c**2 * np.exp(-2.0 * np.asarray(mu) / c)


def constant_kernel_reference_cells(grid: Grid, t: float) -> np.ndarray:
    c = t + 2.0
    L, R = grid.left, grid.right
    return (2.0 / c) * (np.exp(-2.0 * L / c) - np.exp(-2.0 * R / c)) / (R - L)


def relative_l1(g, ref, grid):
    return float(np.sum(np.abs(g - ref) * grid.widths) / np.sum(ref * grid.widths))


def analytic_compare(
    scenario: str,
    t_end: float = 2.0,
    cells_per_decade: int = 16,
    n: float = 1000.0,
    solver: Optional[SolverConfig] = None,
    workers: int = 1,
) -> StudyReport:
    if scenario not in ANALYTIC_SCENARIOS:
        raise ConfigError(f"unknown analytic scenario {scenario!r}")
    if scenario == "constant_kernel_pure_coag":
        return _constant_kernel(t_end, cells_per_decade, n, solver, workers)
    if scenario == "elastic_reduction":
        return _elastic(t_end, cells_per_decade, n, solver, workers)
    return _pure_breakage(t_end, cells_per_decade, n, solver)


def _constant_kernel(t_end, cpd, n, solver, workers):
    solver = solver or SolverConfig(t_end=t_end, rel_tol=1e-8, abs_tol=1e-14)
    base = Scenario(
        kernel=KernelModel("constant", 1.0, 0.2, 0.2),
        prob=CoalescenceProbability("constant", 1.0),
        daughter=PowerLawDaughter(0.0),
        n=n,
        cells_per_decade=cpd,
        solver=replace(solver, t_end=t_end),
    )
    levels = [cpd, 2 * cpd]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(simulate, [replace(base, cells_per_decade=c) for c in levels]))
    errs, m0_errs, m0_curves = [], [], []
    for res in results:
        g = res.grid
        ref = constant_kernel_reference_cells(g, t_end)
        errs.append(relative_l1(res.trajectory.final.g, ref, g))
        m0 = np.array([moment(s, g, 0.0) for s in res.trajectory.states])
        exact = 2.0 / (res.trajectory.times + 2.0)
        m0_curves.append((res.trajectory.times, m0, exact))
        m0_errs.append(float(np.max(np.abs(m0 - exact) / exact)))
    m0_final = moment(results[0].trajectory.final, results[0].grid, 0.0)
    m0_exact = 2.0 / (t_end + 2.0)
    verdicts = {
        "l1_error_within_tolerance": errs[0] <= ANALYTIC_L1_TOL,
        "m0_within_tolerance": abs(m0_final - m0_exact) / m0_exact <= ANALYTIC_M0_TOL,
        "error_decreases_under_refinement": errs[1] < errs[0],
        "mass_conserved": all(r.trajectory.stats["max_mass_drift"] <= MASS_DRIFT_TOL for r in results),
    }
    rep = StudyReport(
        kind="analytic:constant_kernel_pure_coag",
        sweep=levels,
        runs=[_summary(r) for r in results],
        metrics={"l1_error": errs, "m0_final": m0_final, "m0_exact": m0_exact,
                 "m0_max_relative_error": m0_errs},
        verdicts=verdicts,
        thresholds={"l1": ANALYTIC_L1_TOL, "m0_relative": ANALYTIC_M0_TOL, "mass_drift": MASS_DRIFT_TOL},
        config_hash=config_hash({"base": base.describe(), "levels": levels}),
    )
    t, m0, exact = m0_curves[0]
    rep.series = {"t": t.tolist(), "M0": m0.tolist(), "M0_exact": exact.tolist()}
    return rep


def _elastic(t_end, cpd, n, solver, workers):
    solver = solver or SolverConfig(t_end=t_end)
    kern = KernelModel("kinetic_theory", 1.0, 0.2, 0.2)
    half = replace(kern, k=0.5 * kern.k)
    common = dict(n=n, cells_per_decade=cpd, solver=replace(solver, t_end=t_end))
    a = Scenario(kernel=kern, prob=CoalescenceProbability("constant", 0.5), daughter=ElasticDaughter(), **common)
    b = Scenario(kernel=half, prob=CoalescenceProbability("constant", 1.0), daughter=PowerLawDaughter(0.0),
                 **common)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        ra, rb = pool.map(simulate, [a, b])
    sigma = kern.sigma
    dist = max(
        weighted_distance(x, y, ra.grid, sigma) for x, y in zip(ra.trajectory.states, rb.trajectory.states)
    )
    scale = s_norm(ra.initial, ra.grid, sigma)
    tol = 10 * MASS_DRIFT_TOL
    rep = StudyReport(
        kind="analytic:elastic_reduction",
        sweep=["elastic E=1/2", "coalescence with kernel/2"],
        runs=[_summary(ra), _summary(rb)],
        metrics={"max_relative_distance": dist / scale},
        verdicts={"configurations_agree": dist / scale <= tol},
        thresholds={"relative_distance": tol},
        config_hash=config_hash({"a": a.describe(), "b": b.describe()}),
    )
    return rep


def _pure_breakage(t_end, cpd, n, solver):
    solver = solver or SolverConfig(t_end=t_end)
    sc = Scenario(
        kernel=KernelModel("kinetic_theory", 1.0, 0.2, 0.2),
        prob=CoalescenceProbability("constant", 0.0),
        daughter=PowerLawDaughter(0.0),
        n=n,
        cells_per_decade=cpd,
        initial=InitialCondition("monodisperse", amplitude=1.0, volume=1.0),
        solver=replace(solver, t_end=t_end),
        tensor_mode="pivot",
    )
    res = simulate(sc)
    g = res.grid
    m0 = [moment(s, g, 0.0) for s in res.trajectory.states]
    nondecreasing = all(b >= a * (1 - 1e-12) for a, b in zip(m0, m0[1:]))
    rep = StudyReport(
        kind="analytic:pure_breakage",
        sweep=[sc.tensor_mode],
        runs=[_summary(res)],
        metrics={"M0": m0, "M0_growth": m0[-1] / m0[0] if m0[0] else None,
                 "max_mass_drift": float(res.trajectory.stats["max_mass_drift"])},
        verdicts={"mass_conserved": res.trajectory.stats["max_mass_drift"] <= MASS_DRIFT_TOL,
                  "number_nondecreasing": nondecreasing},
        thresholds={"mass_drift": MASS_DRIFT_TOL},
        config_hash=config_hash(sc.describe()),
    )
    rep.series = {"t": res.trajectory.times.tolist(), "M0": m0}
    return rep


# ----------------------------------------------------------------------------
# uniqueness contraction


def uniqueness_experiment(base: Scenario, epsilon: float, workers: int = 1) -> StudyReport:
    """Compare runs from ``g_in`` and ``(1 + epsilon) g_in``.

    Verdict: ``Xi(t) <= Xi(0) exp(C t) (1 + 5%)`` at every checkpoint, with
    ``C`` built from the measured suprema of both weighted norms.  Kernels
    outside the uniqueness class only get a report.
    """
    if epsilon < 0:
        raise DomainError("perturbation size must be nonnegative")
    report = check_assumptions(base.kernel, base.prob, base.daughter, require_uniqueness=True)
    in_class = report["kernel_uniqueness"].status == "pass"
    bumped = replace(base.initial, amplitude=base.initial.amplitude * (1.0 + epsilon))
    if base.initial.preset == "table":
        bumped = replace(base.initial, densities=tuple((1.0 + epsilon) * d for d in base.initial.densities))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rg, rh = pool.map(simulate, [base, replace(base, initial=bumped)])
    grid = rg.grid
    sigma = base.kernel.sigma
    times = rg.trajectory.times
    xi = np.array([weighted_distance(a, b, grid, sigma)
                   for a, b in zip(rg.trajectory.states, rh.trajectory.states)])
    gs = max(s_norm(s, grid, sigma) for s in rg.trajectory.states)
    hs = max(s_norm(s, grid, sigma) for s in rh.trajectory.states)
    eta_sigma = eta(base.daughter, sigma)
    if eta_sigma is None:
        eta_sigma = 2.0  # elastic collisions: two outgoing particles
    C = contraction_rate(gs, hs, base.kernel.bound_k, eta_sigma)
    with np.errstate(over="ignore"):
        envelope = xi[0] * np.exp(C * times) * (1.0 + CONTRACTION_SLACK)
    holds = bool(np.all(xi <= envelope))
    notes = []
    verdicts = {}
    if in_class:
        verdicts["contraction_envelope_holds"] = holds
    else:
        notes.append("kernel outside the uniqueness class: contraction measured, not asserted")
    rep = StudyReport(
        kind="uniqueness",
        sweep=[epsilon],
        runs=[_summary(rg), _summary(rh)],
        metrics={"xi": xi.tolist(), "times": times.tolist(), "rate_C": C,
                 "g_norm_sup": gs, "h_norm_sup": hs, "eta_sigma": eta_sigma,
                 "xi0": float(xi[0]), "envelope_holds": holds,
                 "max_growth_ratio": float(np.max(xi / xi[0])) if xi[0] > 0 else 0.0},
        verdicts=verdicts,
        thresholds={"slack": CONTRACTION_SLACK},
        config_hash=config_hash({"base": base.describe(), "epsilon": epsilon}),
        notes=notes,
    )
    rep.series = {"t": times.tolist(), "xi": xi.tolist()}
    return rep
