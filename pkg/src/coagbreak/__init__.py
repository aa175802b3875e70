"""Sectional solver for coagulation with collision-induced breakage on a truncated volume domain."""
from .diagnostics import (
    BoundCertificate,
    MomentRecord,
    bound_certificate,
    check_bound,
    contraction_rate,
    moment,
    s_norm,
    tail_mass,
    weighted_distance,
)
from .errors import (
    AssemblyError,
    CoagBreakError,
    ConfigError,
    DivergentMomentError,
    DomainError,
    SolverError,
    StiffnessError,
)
from .grid import OUTSIDE, Grid, build_grid, locate_cell, pair_geometry
from .integrator import InitialCondition, SolverConfig, Trajectory, run, step, truncate_initial
from .kernels import (
    AssumptionReport,
    CoalescenceProbability,
    ElasticDaughter,
    KernelModel,
    PowerLawDaughter,
    SamplePlan,
    check_assumptions,
    daughter_partial_moment,
    eta,
    eval_daughter,
    eval_kernel,
    fragment_count,
)
from .operators import OperatorWorkspace, State, apply_rhs, assemble, number_balance_rate

__version__ = "0.1.0"
