"""One check per acceptance criterion, each printing a PASS/FAIL line."""
import time
from dataclasses import replace

import numpy as np
import pytest
from oracle import naive_rhs, naive_terms_scale
from scipy import integrate

from coagbreak import (
    CoalescenceProbability,
    KernelModel,
    PowerLawDaughter,
    SolverConfig,
    assemble,
    bound_certificate,
    build_grid,
    check_bound,
    daughter_partial_moment,
    eta,
    eval_daughter,
    fragment_count,
    moment,
    s_norm,
)
from coagbreak.cli import main
from coagbreak.studies import Scenario, analytic_compare, simulate, truncation_sweep, uniqueness_experiment

MASS_DRIFT = 1e-8
RUNTIME_RUN = 60.0
RUNTIME_SWEEP = 300.0
L1_TOL = 0.02
M0_TOL = 0.01
ORACLE_REL = 1e-12
CLOSED_FORM_REL = 1e-13
QUAD_REL = 1e-8
ENVELOPE_SLACK = 1.05


def test_c1_mass_conservation(verdict):
    t0 = time.perf_counter()
    res = simulate(Scenario())
    wall = time.perf_counter() - t0
    drift = float(np.max(res.trajectory.mass_drift))
    verdict("C1 mass drift <= 1e-8 on the default scenario", drift <= MASS_DRIFT and wall <= RUNTIME_RUN,
            f"max drift {drift:.2e}, {wall:.2f} s")


def test_c2_constant_kernel_oracle(verdict):
    rep = analytic_compare("constant_kernel_pure_coag", t_end=2.0, cells_per_decade=16, n=1000.0)
    l1 = rep.metrics["l1_error"]
    m0_err = abs(rep.metrics["m0_final"] - 0.5)
    ok = l1[0] <= L1_TOL and m0_err <= M0_TOL * 0.5 and l1[1] < l1[0]
    verdict("C2 constant-kernel closed form", ok,
            f"L1 {l1[0]:.2e} -> {l1[1]:.2e} under refinement, |M0 - 0.5| = {m0_err:.2e}")


def _small_grids():
    out = []
    for n in (2.0, 10.0**0.5, 10.0, 10.0**1.5, 100.0, 1000.0, 1e4):
        for cpd in range(1, 9):
            g = build_grid(n, cpd)
            if g.size <= 8:
                out.append(g)
    return out


MODELS = [
    (KernelModel("constant"), 1.0, 0.0, "rescaled"),
    (KernelModel("kinetic_theory", 1.0, 0.2, 0.2), 0.5, -0.5, "rescaled"),
    (KernelModel("singular_bound", 1.0, 0.3, 0.2), 0.0, -0.9, "pivot"),
    (KernelModel("uniqueness_class", 1.0, 0.2, 0.2), 0.3, 0.0, "pivot"),
]


def test_c3_brute_force_equivalence(verdict):
    rng = np.random.default_rng(20261016)
    worst = 0.0
    cases = 0
    for gi, grid in enumerate(_small_grids()):
        kern, e, theta, mode = MODELS[gi % len(MODELS)]
        ws = assemble(grid, kern, CoalescenceProbability("constant", e), PowerLawDaughter(theta), mode)
        E = np.full_like(ws.K, e)
        for _ in range(100):
            g = rng.exponential(size=grid.size) * 10 ** rng.uniform(-2, 2)
            g[rng.random(grid.size) < 0.2] = 0.0
            ref = naive_rhs(grid, ws.K, E, ws.breakage, g)
            scale = max(naive_terms_scale(grid, ws.K, g), float(np.max(np.abs(ref))))
            worst = max(worst, float(np.max(np.abs(ws.rhs(g) - ref))) / scale)
            cases += 1
    verdict("C3 sparse operator equals triple-loop oracle", worst <= ORACLE_REL,
            f"{cases} states, worst relative deviation {worst:.1e}")


def test_c4_daughter_identities(verdict):
    rng = np.random.default_rng(4)
    worst_cf = worst_q = 0.0
    for _ in range(1000):
        nu, tau = 10 ** rng.uniform(-3, 3, 2)
        theta = -rng.uniform(0.0, 0.95)
        P = PowerLawDaughter(theta)
        s = nu + tau
        N = (theta + 2) / (theta + 1)
        m1 = daughter_partial_moment(P, 1, s, nu, tau)
        m0 = daughter_partial_moment(P, 0, s, nu, tau)
        worst_cf = max(worst_cf, abs(m1 / s - 1), abs(m0 / N - 1))
        q0, _ = integrate.quad(lambda m: eval_daughter(P, m, nu, tau), 0, s, epsabs=0, epsrel=1e-12, limit=500)
        q1, _ = integrate.quad(lambda m: m * eval_daughter(P, m, nu, tau), 0, s, epsabs=0, epsrel=1e-12, limit=500)
        worst_q = max(worst_q, abs(q0 / m0 - 1), abs(q1 / m1 - 1))
        assert fragment_count(P) == pytest.approx(N, rel=1e-15)
    verdict("C4 daughter mass and count identities", worst_cf <= CLOSED_FORM_REL and worst_q <= QUAD_REL,
            f"closed form {worst_cf:.1e}, quadrature {worst_q:.1e}")


def test_c5_norm_certificate(verdict):
    sc = Scenario()
    res = simulate(sc)
    sigma = sc.kernel.sigma
    cert = bound_certificate(s_norm(res.initial, res.grid, sigma), sc.kernel.bound_k, sc.kernel.omega, sigma,
                             eta(sc.daughter, 2 * sigma), sc.solver.t_end)
    chk = check_bound(res.trajectory, cert, res.grid, sigma)
    verdict("C5 weighted norm stays under P(T)", chk.passed and chk.min_margin > 0,
            f"min margin {chk.min_margin:.3e}, P(T) = {cert.P:.3e}")


def test_c6_number_monotonicity(verdict):
    coag = simulate(Scenario(prob=CoalescenceProbability("constant", 1.0)))
    m0c = np.array([moment(s, coag.grid, 0.0) for s in coag.trajectory.states])
    coag_ok = bool(np.all(np.diff(m0c) <= 0))
    details = [f"E=1 M0 {m0c[0]:.3f} -> {m0c[-1]:.3f}"]
    brk_ok = True
    for theta in (0.0, -0.5):
        sc = Scenario(prob=CoalescenceProbability("constant", 0.0), daughter=PowerLawDaughter(theta),
                      tensor_mode="pivot")
        r = simulate(sc)
        m0 = np.array([moment(s, r.grid, 0.0) for s in r.trajectory.states])
        drift = r.trajectory.stats["max_mass_drift"]
        brk_ok &= bool(np.all(np.diff(m0) >= -1e-12 * m0[:-1])) and drift <= MASS_DRIFT
        details.append(f"E=0 theta={theta:g} M0 x{m0[-1] / m0[0]:.3g}, drift {drift:.1e}")
    rep = analytic_compare("pure_breakage")
    brk_ok &= rep.passed
    verdict("C6 monotone particle number", coag_ok and brk_ok, "; ".join(details))


def test_c7_uniqueness_contraction(verdict):
    base = Scenario(kernel=KernelModel("uniqueness_class", 1.0, 0.2, 0.2), solver=SolverConfig(t_end=1.0))
    rep = uniqueness_experiment(base, 1e-3)
    xi = np.array(rep.metrics["xi"])
    t = np.array(rep.metrics["times"])
    envelope = xi[0] * np.exp(rep.metrics["rate_C"] * t) * ENVELOPE_SLACK
    ok = bool(np.all(xi <= envelope)) and rep.verdicts.get("contraction_envelope_holds", False)
    verdict("C7 perturbation distance under its exponential envelope", ok,
            f"C = {rep.metrics['rate_C']:.2f}, max Xi(t)/Xi(0) = {rep.metrics['max_growth_ratio']:.4f}")


def test_c8_truncation_convergence(verdict):
    t0 = time.perf_counter()
    rep = truncation_sweep(Scenario(), [16, 64, 256])
    wall = time.perf_counter() - t0
    d = rep.metrics["successive_distances"]
    ok = all(x is not None for x in d) and all(b < a for a, b in zip(d, d[1:])) and wall <= RUNTIME_SWEEP
    verdict("C8 truncation distances strictly decrease", ok,
            "distances " + ", ".join(f"{x:.4g}" for x in d) + f", {wall:.2f} s")


def test_c9_thread_determinism(verdict, tmp_path):
    cfg = tmp_path / "default.ini"
    cfg.write_text("")  # every default is the reference scenario
    codes = [main(["run", "--config", str(cfg), "--out", str(tmp_path / f"t{k}"), "--threads", str(k)])
             for k in (1, 8)]
    a = (tmp_path / "t1" / "trajectory.csv").read_bytes()
    b = (tmp_path / "t8" / "trajectory.csv").read_bytes()
    verdict("C9 trajectory.csv identical at 1 and 8 threads", codes == [0, 0] and a == b,
            f"{len(a)} bytes each")
