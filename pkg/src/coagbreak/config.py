"""Flat-section run configuration.

The document is INI style: named sections, scalar ``key = value`` entries,
decimal numbers and comma-separated lists.  All volumes and times are
dimensionless.  Example::

    [kernel]
    variant = kinetic_theory
    k = 1.0
    omega = 0.2
    sigma = 0.2

    [probability]
    value = 0.5

    [daughter]
    theta = -0.5

    [grid]
    n = 100
    cells_per_decade = 8

    [solver]
    t_end = 5

Every section and key is optional; omitted values take the defaults of the
corresponding dataclass.  Validation collects every problem before raising.
"""
from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DomainError
from .integrator import INITIAL_PRESETS, InitialCondition, SolverConfig
from .kernels import KERNEL_VARIANTS, CoalescenceProbability, ElasticDaughter, KernelModel, PowerLawDaughter
from .operators import TENSOR_MODES
from .studies import ANALYTIC_SCENARIOS, Scenario

STUDY_KINDS = ("truncation", "analytic", "uniqueness")

_SCHEMA = {
    "kernel": {"variant": str, "k": float, "omega": float, "sigma": float, "bound_k": float},
    "probability": {"variant": str, "value": float},
    "daughter": {"kind": str, "theta": float, "tensor_mode": str},
    "grid": {"n": float, "cells_per_decade": int},
    "initial": {"preset": str, "amplitude": float, "scale": float, "shape": float, "volume": float,
                "table": str, "volumes": "floats", "densities": "floats"},
    "solver": {"t_end": float, "rel_tol": float, "abs_tol": float, "dt_init": float, "dt_min": float,
               "dt_max": float, "negativity_clip": float, "output_times": "floats", "n_outputs": int},
    "diagnostics": {"moments": "floats", "tail_lambda": float},
    "study": {"kind": str, "n_values": "floats", "scenario": str, "epsilon": float,
              "analytic_t_end": float, "analytic_n": float, "analytic_cells_per_decade": int},
}


@dataclass(frozen=True)
class DiagnosticsConfig:
    moments: tuple = ()
    tail_lambda: float = 1.0


@dataclass(frozen=True)
class StudyConfig:
    kind: Optional[str] = None
    n_values: tuple = (16.0, 64.0, 256.0)
    scenario: Optional[str] = None
    epsilon: float = 1e-3
    analytic_t_end: float = 2.0
    analytic_n: float = 1000.0
    analytic_cells_per_decade: int = 16


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario = field(default_factory=Scenario)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    study: StudyConfig = field(default_factory=StudyConfig)

    @property
    def kernel(self):
        return self.scenario.kernel

    @property
    def sigma(self):
        return self.scenario.kernel.sigma


def _convert(kind, raw):
    raw = raw.strip()
    if kind is str:
        return raw
    if kind is int:
        f = float(raw)
        if f != int(f):
            raise ValueError(f"{raw!r} is not an integer")
        return int(f)
    if kind is float:
        return float(raw)
    return tuple(float(p) for p in raw.replace(";", ",").split(",") if p.strip())


def _read_table(path):
    vols, dens = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vols.append(float(row[0]))
                dens.append(float(row[1]))
            except (ValueError, IndexError):
                continue  # header line
    return tuple(vols), tuple(dens)


def parse_config(text: str, base_dir=None) -> RunConfig:
    """Parse and validate a configuration document."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc

    errors = []
    vals = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            errors.append(f"unknown section [{sec}]")
            continue
        vals[sec] = {}
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                errors.append(f"unknown key '{key}' in [{sec}]")
                continue
            try:
                vals[sec][key] = _convert(_SCHEMA[sec][key], raw)
            except ValueError:
                errors.append(f"[{sec}] {key} = {raw!r} is not a valid number")

    def get(sec, key, default):
        return vals.get(sec, {}).get(key, default)

    kd = KernelModel()
    variant = get("kernel", "variant", kd.variant)
    k = get("kernel", "k", kd.k)
    omega = get("kernel", "omega", kd.omega)
    sigma = get("kernel", "sigma", kd.sigma)
    bound_k = get("kernel", "bound_k", None)
    if variant not in KERNEL_VARIANTS:
        errors.append(f"kernel variant {variant!r} not one of {', '.join(KERNEL_VARIANTS)}")
    if not k >= 0:
        errors.append("kernel rate constant k must be nonnegative")
    if bound_k is not None and not bound_k >= 0:
        errors.append("bound_k must be nonnegative [kernel_growth]")
    if not 0 < sigma < 0.5:
        errors.append("sigma in (0, 1/2) required [kernel_growth]")
    if not 0 <= omega < 1:
        errors.append("omega in [0, 1) required [kernel_growth]")
    if not 0 <= omega - sigma < 1:
        errors.append("0 <= omega - sigma < 1 required [kernel_growth]")

    pvariant = get("probability", "variant", "constant")
    pvalue = get("probability", "value", 0.5)
    if pvariant != "constant":
        errors.append("only the constant coalescence probability is configurable from file")
    if not 0 <= pvalue <= 1:
        errors.append("coalescence probability value must lie in [0, 1]")

    dkind = get("daughter", "kind", "power_law")
    theta = get("daughter", "theta", -0.5)
    tensor_mode = get("daughter", "tensor_mode", "rescaled")
    if dkind not in ("power_law", "elastic"):
        errors.append(f"daughter kind {dkind!r} not one of power_law, elastic")
    if tensor_mode not in TENSOR_MODES:
        errors.append(f"tensor_mode {tensor_mode!r} not one of {', '.join(TENSOR_MODES)}")
    if dkind == "power_law":
        if not -1 < theta <= 0:
            errors.append("theta in (-1, 0] required (infeasible fragment count)")
        elif 0 < sigma < 0.5 and not (-theta) + sigma < 1:
            errors.append("tau2 + sigma < 1 required with tau2 = -theta [daughter_singularity]")
        elif 0 < sigma < 0.5 and not theta - 2 * sigma + 1 > 0:
            errors.append("theta - 2 sigma + 1 > 0 required for a finite eta(2 sigma) "
                          "[daughter_negative_moment]")

    n = get("grid", "n", 100.0)
    cpd = get("grid", "cells_per_decade", 8)
    if not (n > 1 and math.isfinite(n)):
        errors.append("grid n must exceed 1")
    if cpd < 1:
        errors.append("cells_per_decade must be at least 1")

    idef = InitialCondition()
    preset = get("initial", "preset", idef.preset)
    table = get("initial", "table", None)
    volumes = get("initial", "volumes", ())
    densities = get("initial", "densities", ())
    if table is not None:
        preset = "table"
        path = Path(table)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            volumes, densities = _read_table(path)
        except OSError as exc:
            errors.append(f"cannot read initial table {table!r}: {exc}")
    if preset not in INITIAL_PRESETS:
        errors.append(f"initial preset {preset!r} not one of {', '.join(INITIAL_PRESETS)}")

    sdef = Scenario().solver
    skw = {f.name: get("solver", f.name, getattr(sdef, f.name)) for f in fields(SolverConfig)}

    study_kw = {f.name: get("study", f.name, f.default) for f in fields(StudyConfig)}
    if study_kw["kind"] is not None and study_kw["kind"] not in STUDY_KINDS:
        errors.append(f"study kind {study_kw['kind']!r} not one of {', '.join(STUDY_KINDS)}")
    if study_kw["scenario"] is not None and study_kw["scenario"] not in ANALYTIC_SCENARIOS:
        errors.append(f"analytic scenario {study_kw['scenario']!r} not one of {', '.join(ANALYTIC_SCENARIOS)}")

    diag_kw = {f.name: get("diagnostics", f.name, f.default) for f in fields(DiagnosticsConfig)}

    if errors:
        raise ConfigError(errors)

    try:
        kernel = KernelModel(variant, k, omega, sigma, bound_k)
        prob = CoalescenceProbability("constant", pvalue)
        daughter = ElasticDaughter() if dkind == "elastic" else PowerLawDaughter(theta)
        init = InitialCondition(
            preset,
            amplitude=get("initial", "amplitude", idef.amplitude),
            scale=get("initial", "scale", idef.scale),
            shape=get("initial", "shape", idef.shape),
            volume=get("initial", "volume", idef.volume),
            volumes=tuple(volumes),
            densities=tuple(densities),
        )
        solver = SolverConfig(**skw)
    except DomainError as exc:
        raise ConfigError([str(exc)]) from exc
    sc = Scenario(kernel, prob, daughter, float(n), int(cpd), init, solver, tensor_mode)
    return RunConfig(sc, DiagnosticsConfig(**diag_kw), StudyConfig(**study_kw))


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    sc = cfg.scenario
    d = sc.daughter
    secs = {
        "kernel": {"variant": sc.kernel.variant, "k": sc.kernel.k, "omega": sc.kernel.omega,
                   "sigma": sc.kernel.sigma, "bound_k": sc.kernel.bound_k},
        "probability": {"variant": sc.prob.variant, "value": sc.prob.value},
        "daughter": {"kind": d.kind, "tensor_mode": sc.tensor_mode},
        "grid": {"n": sc.n, "cells_per_decade": sc.cells_per_decade},
        "initial": {"preset": sc.initial.preset, "amplitude": sc.initial.amplitude,
                    "scale": sc.initial.scale, "shape": sc.initial.shape, "volume": sc.initial.volume},
        "solver": {},
        "diagnostics": {"tail_lambda": cfg.diagnostics.tail_lambda},
        "study": {},
    }
    if isinstance(d, PowerLawDaughter):
        secs["daughter"]["theta"] = d.theta
    if sc.initial.preset == "table":
        secs["initial"]["volumes"] = sc.initial.volumes
        secs["initial"]["densities"] = sc.initial.densities
    for f in fields(SolverConfig):
        v = getattr(sc.solver, f.name)
        if v is not None:
            secs["solver"][f.name] = v
    if cfg.diagnostics.moments:
        secs["diagnostics"]["moments"] = cfg.diagnostics.moments
    for f in fields(StudyConfig):
        v = getattr(cfg.study, f.name)
        if v is not None:
            secs["study"][f.name] = v
    lines = []
    for sec, kv in secs.items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in kv.items())
        lines.append("")
    return "\n".join(lines)
