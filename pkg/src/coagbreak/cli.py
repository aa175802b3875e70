"""Command line entry point.

    coagbreak run|check-assumptions|study|compare-analytic --config FILE --out DIR [--threads K]

Exit codes: 0 success with every verdict passing, 1 completed with a failing
verdict, 2 execution error (bad config, I/O, solver failure).
"""
from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from pathlib import Path

from . import __version__
from .config import dump_config, load_config
from .diagnostics import bound_certificate, check_bound, moment, s_norm, tail_mass
from .errors import CoagBreakError
from .io import trajectory_summary, write_json, write_trajectory_csv, write_tsv
from .kernels import check_assumptions, eta
from .studies import (
    ANALYTIC_SCENARIOS,
    MASS_DRIFT_TOL,
    analytic_compare,
    config_hash,
    simulate,
    truncation_sweep,
    uniqueness_experiment,
)

logger = logging.getLogger("coagbreak")

COMMANDS = ("run", "check-assumptions", "study", "compare-analytic")


def _manifest(cfg, command, threads, wall, **extra):
    doc = {
        "command": command,
        "software": {"package": "coagbreak", "version": __version__, "python": platform.python_version()},
        "config_text": dump_config(cfg),
        "config_hash": config_hash(dump_config(cfg)),
        "threads": threads,
        "wall_seconds": wall,
    }
    doc.update(extra)
    return doc


def _cmd_run(cfg, out, threads):
    t0 = time.perf_counter()
    res = simulate(cfg.scenario, threads=threads)
    sc = cfg.scenario
    grid = res.grid
    sigma = sc.kernel.sigma
    traj = res.trajectory
    write_trajectory_csv(traj, grid, out / "trajectory.csv")
    write_json(trajectory_summary(traj), out / "trajectory.json")

    verdicts = {"mass_conserved": traj.stats["max_mass_drift"] <= MASS_DRIFT_TOL}
    cert_block = {"available": False}
    e2 = eta(sc.daughter, 2 * sigma)
    if e2 is not None:
        norm0 = s_norm(res.initial, grid, sigma)
        cert = bound_certificate(norm0, sc.kernel.bound_k, sc.kernel.omega, sigma, e2, sc.solver.t_end)
        chk = check_bound(traj, cert, grid, sigma)
        cert_block = {"available": True, "certificate": cert.to_dict(), "check": chk.to_dict()}
        verdicts["norm_bound_holds"] = chk.passed
    lam = cfg.diagnostics.tail_lambda
    m1_0 = moment(res.initial, grid, 1.0)
    tails = [tail_mass(s, grid, lam, sigma, m1_0) for s in traj.states]
    wall = time.perf_counter() - t0
    manifest = _manifest(
        cfg, "run", threads, wall,
        grid=grid.summary(),
        workspace=res.workspace.stats,
        certificate=cert_block,
        tail={"lambda": lam, "values": [t[0] for t in tails], "majorant": tails[0][1]},
        step_statistics=traj.stats,
        verdicts=verdicts,
    )
    write_json(manifest, out / "manifest.json")
    return 0 if all(verdicts.values()) else 1


def _cmd_check(cfg, out, threads):
    t0 = time.perf_counter()
    sc = cfg.scenario
    need_unique = cfg.study.kind == "uniqueness"
    rep = check_assumptions(sc.kernel, sc.prob, sc.daughter, require_uniqueness=need_unique)
    write_json(rep.to_dict(), out / "assumptions.json")
    for r in rep.records:
        logger.info("%-26s %-15s worst ratio %s", r.id, r.status, r.worst_ratio)
    if rep.failures:
        print("failing hypotheses: " + ", ".join(rep.failures), file=sys.stderr)
    write_json(_manifest(cfg, "check-assumptions", threads, time.perf_counter() - t0,
                         verdicts={"assumptions_hold": rep.passed}), out / "manifest.json")
    return 0 if rep.passed else 1


def _write_study(rep, out, stem="study"):
    write_json(rep.to_dict(), out / f"{stem}.json")
    if rep.series:
        write_tsv(rep.series, out / f"{stem}.tsv")


def _cmd_study(cfg, out, threads):
    t0 = time.perf_counter()
    st = cfg.study
    if st.kind is None:
        raise CoagBreakError("study command needs [study] kind")
    if st.kind == "truncation":
        rep = truncation_sweep(cfg.scenario, st.n_values, workers=threads)
    elif st.kind == "uniqueness":
        rep = uniqueness_experiment(cfg.scenario, st.epsilon, workers=threads)
    else:
        return _cmd_compare(cfg, out, threads)
    _write_study(rep, out)
    write_json(_manifest(cfg, "study", threads, time.perf_counter() - t0, verdicts=rep.verdicts),
               out / "manifest.json")
    return 0 if rep.passed else 1


def _cmd_compare(cfg, out, threads):
    t0 = time.perf_counter()
    st = cfg.study
    names = [st.scenario] if st.scenario else list(ANALYTIC_SCENARIOS)
    reports = []
    for name in names:
        rep = analytic_compare(name, t_end=st.analytic_t_end, cells_per_decade=st.analytic_cells_per_decade,
                               n=st.analytic_n, workers=threads)
        _write_study(rep, out, stem=f"study_{name}")
        reports.append(rep)
    if len(reports) == 1:
        _write_study(reports[0], out)
    else:
        write_json({"reports": [r.to_dict() for r in reports],
                    "passed": all(r.passed for r in reports)}, out / "study.json")
    verdicts = {f"{r.kind}:{k}": v for r in reports for k, v in r.verdicts.items()}
    write_json(_manifest(cfg, "compare-analytic", threads, time.perf_counter() - t0, verdicts=verdicts),
               out / "manifest.json")
    return 0 if all(r.passed for r in reports) else 1


_DISPATCH = {
    "run": _cmd_run,
    "check-assumptions": _cmd_check,
    "study": _cmd_study,
    "compare-analytic": _cmd_compare,
}


def dispatch(command: str, config_path, out_dir, threads: int = 1) -> int:
    """Run one command; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return _DISPATCH[command](cfg, out, max(1, int(threads)))
    except (CoagBreakError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coagbreak", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="configuration file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return dispatch(args.command, args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
