"""Collision kernels, coalescence probabilities and daughter distributions.

Everything here is a pure function of immutable model values, so models can be
shared freely between threads.  ``check_assumptions`` certifies the growth and
singularity hypotheses the well-posedness theory needs on a finite log lattice.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergentMomentError, DomainError

KERNEL_VARIANTS = (
    "constant",
    "kinetic_theory",
    "singular_bound",
    "uniqueness_class",
    "multiplicative",
)

# relative slack allowed when comparing the two sides of a hypothesis
HYPOTHESIS_SLACK = 1e-12


def _positive(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if not np.all(a > 0) or not np.all(np.isfinite(a)):
            raise DomainError("volumes must be positive and finite")
        out.append(a)
    return out


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class KernelModel:
    """Collision rate ``Psi(mu, nu)`` together with its growth-bound parameters.

    ``k`` scales the kernel itself.  ``bound_k``, ``omega`` and ``sigma`` are
    the constants of the growth bound
    ``Psi <= bound_k (1+mu)^omega (1+nu)^omega / (mu+nu)^sigma``; ``bound_k``
    defaults to ``k``.  ``sigma`` also fixes the weight ``mu^(-2 sigma)`` of
    the solution norm.
    """

    variant: str = "kinetic_theory"
    k: float = 1.0
    omega: float = 0.2
    sigma: float = 0.2
    bound_k: Optional[float] = None

    def __post_init__(self):
        if self.variant not in KERNEL_VARIANTS:
            raise DomainError(f"unknown kernel variant {self.variant!r}")
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise DomainError("kernel rate constant k must be nonnegative")
        if not 0 < self.sigma < 0.5:
            raise DomainError("sigma in (0, 1/2) required")
        if not 0 <= self.omega < 1:
            raise DomainError("omega in [0, 1) required")
        if not 0 <= self.omega - self.sigma < 1:
            raise DomainError("0 <= omega - sigma < 1 required")
        if self.bound_k is None:
            object.__setattr__(self, "bound_k", float(self.k))
        elif self.bound_k < 0:
            raise DomainError("bound constant must be nonnegative")

    def __call__(self, mu, nu):
        return eval_kernel(self, mu, nu)


def eval_kernel(model: KernelModel, mu, nu):
    """Evaluate the collision kernel; accepts scalars or broadcastable arrays."""
    mu, nu = _positive(mu, nu)
    k = model.k
    if model.variant == "constant":
        out = np.full(np.broadcast(mu, nu).shape, float(k))
    elif model.variant == "kinetic_theory":
        out = k * (np.cbrt(mu) + np.cbrt(nu)) * np.sqrt(mu * nu) * (mu + nu) ** -1.5
    elif model.variant == "singular_bound":
        w = model.omega
        out = k * ((1 + mu) ** w * (1 + nu) ** w) / (mu + nu) ** model.sigma
    elif model.variant == "uniqueness_class":
        out = k / (mu + nu) ** model.sigma
    else:
        out = k * (mu * nu)
    return _unwrap(out)


@dataclass(frozen=True)
class CoalescenceProbability:
    """Probability ``E(mu, nu)`` that a collision merges the pair.

    ``variant="constant"`` uses ``value``; ``variant="volume_dependent"``
    calls ``func(mu, nu)``, which must be symmetric with values in [0, 1].
    """

    variant: str = "constant"
    value: float = 1.0
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant == "constant":
            if not 0 <= self.value <= 1:
                raise DomainError("coalescence probability must lie in [0, 1]")
        elif self.variant == "volume_dependent":
            if self.func is None:
                raise DomainError("volume_dependent probability needs func")
        else:
            raise DomainError(f"unknown probability variant {self.variant!r}")

    def __call__(self, mu, nu):
        mu, nu = _positive(mu, nu)
        if self.variant == "constant":
            out = np.full(np.broadcast(mu, nu).shape, float(self.value))
        else:
            out = np.asarray(self.func(mu, nu), dtype=float)
            if np.any(out < 0) or np.any(out > 1):
                raise DomainError("E(mu, nu) left [0, 1]")
        return _unwrap(out)

    def complement(self, mu, nu):
        """Breakage probability ``1 - E``."""
        return 1.0 - self(mu, nu)

    @property
    def is_pure_coalescence(self):
        return self.variant == "constant" and self.value == 1.0


@dataclass(frozen=True)
class PowerLawDaughter:
    """Fragment density ``(theta+2) mu^theta / (nu+tau)^(theta+1)`` on (0, nu+tau].

    Only ``theta`` in (-1, 0] gives a finite fragment count.
    """

    theta: float = 0.0

    def __post_init__(self):
        if not -1 < self.theta <= 0:
            raise DomainError("theta in (-1, 0] required (infeasible fragment count)")

    kind = "power_law"

    @property
    def tau2(self):
        # singularity exponent at mu -> 0
        return -self.theta

    def density(self, mu, nu, tau):
        return eval_daughter(self, mu, nu, tau)

    def partial_moment(self, q, x, nu, tau):
        return daughter_partial_moment(self, q, x, nu, tau)

    def fragment_count(self):
        return fragment_count(self)

    def eta(self, r):
        return eta(self, r)

    def k_prime(self, lam):
        """Constant of the bound ``P <= k'(lam) mu^(-tau2)`` valid for nu+tau > lam."""
        if lam <= 0:
            raise DomainError("lambda must be positive")
        return (self.theta + 2) / lam ** (1 + self.theta)


@dataclass(frozen=True)
class ElasticDaughter:
    """Elastic collision: the two parents re-emerge unchanged.

    This is a point-mass distribution, so it has no density; the operator
    module handles it by returning parents to their own cells.
    """

    kind = "elastic"

    def fragment_count(self):
        return 2.0

    def eta(self, r):
        return None


def eval_daughter(model: PowerLawDaughter, mu, nu, tau):
    mu, nu, tau = _positive(mu, nu, tau)
    th = model.theta
    s = nu + tau
    with np.errstate(over="ignore"):
        val = (th + 2) * mu**th / s ** (th + 1)
    return _unwrap(np.where(mu <= s, val, 0.0))


def daughter_partial_moment(model: PowerLawDaughter, q, x, nu, tau):
    """Closed form of ``int_0^x mu^q P(mu | nu; tau) dmu`` for x <= nu + tau."""
    x, nu, tau = _positive(x, nu, tau)
    th = model.theta
    p = th + q + 1
    if p <= 0:
        raise DivergentMomentError(f"moment of order {q} diverges for theta={th}")
    s = nu + tau
    if np.any(x > s * (1 + 1e-15)):
        raise DomainError("upper limit exceeds the parent volume nu + tau")
    return _unwrap((th + 2) * x**p / (p * s ** (th + 1)))


def fragment_count(model) -> float:
    if isinstance(model, ElasticDaughter):
        return 2.0
    return (model.theta + 2) / (model.theta + 1)


def eta(model, r: float) -> float:
    """Constant in ``int_0^nu mu^-r P dmu <= eta(r) nu^-r``."""
    if isinstance(model, ElasticDaughter):
        return None
    den = model.theta - r + 1
    if den <= 0:
        raise DivergentMomentError(f"eta({r}) diverges for theta={model.theta}")
    return (model.theta + 2) / den


# ----------------------------------------------------------------------------
# hypothesis certification


@dataclass(frozen=True)
class SamplePlan:
    """Log lattice over which hypotheses are sampled."""

    lo: float = 1e-6
    hi: float = 1e6
    points_per_decade: int = 4
    lambdas: tuple = (1e-2, 1.0, 1e2)

    def lattice(self):
        m = int(round(math.log10(self.hi / self.lo) * self.points_per_decade)) + 1
        return np.geomspace(self.lo, self.hi, m)


@dataclass
class HypothesisRecord:
    id: str
    status: str  # "pass" | "fail" | "not-applicable"
    worst_ratio: float = float("nan")
    worst_point: tuple = ()
    samples: int = 0
    required: bool = True
    detail: str = ""

    def to_dict(self):
        d = asdict(self)
        d["worst_point"] = [float(v) for v in self.worst_point]
        d["worst_ratio"] = None if math.isnan(self.worst_ratio) else float(self.worst_ratio)
        return d


@dataclass
class AssumptionReport:
    records: list

    def __getitem__(self, hid):
        for r in self.records:
            if r.id == hid:
                return r
        raise KeyError(hid)

    @property
    def passed(self):
        return all(r.status != "fail" for r in self.records if r.required)

    @property
    def failures(self):
        return [r.id for r in self.records if r.required and r.status == "fail"]

    def to_dict(self):
        return {"passed": self.passed, "hypotheses": [r.to_dict() for r in self.records]}


def _record(hid, ratio, points, required=True, detail=""):
    ratio = np.asarray(ratio, dtype=float)
    flat = ratio.ravel()
    bad = np.isnan(flat)
    if bad.any():
        idx = int(np.argmax(bad))
        worst = float("inf")
    else:
        idx = int(np.argmax(flat))
        worst = float(flat[idx])
    where = np.unravel_index(idx, ratio.shape)
    point = tuple(float(np.broadcast_to(p, ratio.shape)[where]) for p in points)
    status = "pass" if worst <= 1 + HYPOTHESIS_SLACK else "fail"
    return HypothesisRecord(hid, status, worst, point, int(flat.size), required, detail)


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    r = np.where((num == 0) & (den == 0), 0.0, r)
    return np.where((num > 0) & (den == 0), np.inf, r)


def check_assumptions(
    kernel: KernelModel,
    prob: CoalescenceProbability,
    daughter,
    plan: Optional[SamplePlan] = None,
    require_uniqueness: bool = False,
) -> AssumptionReport:
    """Sample every hypothesis on ``plan`` and report the worst ratio.

    A ratio is ``lhs / rhs`` of the inequality, so a hypothesis passes iff
    the worst sampled ratio is at most ``1 + 1e-12``.  The kernel uniqueness
    bound is always evaluated but only counts toward ``passed`` when
    ``require_uniqueness`` is set.
    """
    plan = plan or SamplePlan()
    v = plan.lattice()
    sig = kernel.sigma
    records = []

    mu, nu = v[:, None], v[None, :]
    psi = np.asarray(eval_kernel(kernel, mu, nu))
    bound = kernel.bound_k * ((1 + mu) ** kernel.omega * (1 + nu) ** kernel.omega) / (mu + nu) ** sig
    records.append(_record("kernel_growth", _safe_ratio(psi, bound), (mu, nu)))

    power_law = isinstance(daughter, PowerLawDaughter)
    r = 2 * sig
    if power_law and daughter.theta - r + 1 <= 0:
        records.append(HypothesisRecord(
            "coalescence_floor", "fail", float("inf"), (), 0,
            detail=f"eta({r:g}) diverges for theta={daughter.theta:g}"))
        records.append(HypothesisRecord(
            "daughter_negative_moment", "fail", float("inf"), (), 0,
            detail=f"moment of order -{r:g} diverges for theta={daughter.theta:g}"))
        power_law_moment = False
    else:
        power_law_moment = power_law

    if power_law_moment:
        eta_r = eta(daughter, r)
        floor = (eta_r - 2) / (eta_r - 1)
        small = v[v < 1]
        a, b = small[:, None], small[None, :]
        e = np.asarray(prob(a, b)) * np.ones_like(a * b)
        records.append(_record(
            "coalescence_floor", _safe_ratio(np.full_like(e, floor), e), (a, b),
            detail=f"E >= {floor:.6g} required on (0,1)^2"))

        # int_0^nu mu^-r P(mu | nu - tau; tau) dmu <= eta(r) nu^-r, with 0 < tau < nu
        nn, frac = v[:, None], np.linspace(0.05, 0.95, 19)[None, :]
        tt = nn * frac
        lhs = daughter_partial_moment(daughter, -r, nn * np.ones_like(frac), nn - tt, tt)
        records.append(_record(
            "daughter_negative_moment", _safe_ratio(lhs, eta_r * nn**-r), (nn, tt)))
    elif not power_law:
        records.append(HypothesisRecord(
            "coalescence_floor", "not-applicable", required=False,
            detail="no density-valued daughter distribution"))
        records.append(HypothesisRecord(
            "daughter_negative_moment", "not-applicable", required=False,
            detail="point-mass daughter distribution"))

    if power_law:
        tau2 = daughter.tau2
        if tau2 + sig >= 1:
            records.append(HypothesisRecord(
                "daughter_singularity", "fail", float("inf"), (), 0,
                detail=f"tau2 + sigma = {tau2 + sig:g} must be < 1"))
        else:
            worst = None
            total = 0
            for lam in plan.lambdas:
                m = v[v < lam][:, None, None]
                n2 = v[None, :, None]
                t2 = v[None, None, :]
                ok = (n2 + t2 > lam) & (m > 0)
                p = np.asarray(eval_daughter(daughter, m, n2, t2))
                ratio = np.where(ok, _safe_ratio(p, daughter.k_prime(lam) * m**-tau2), 0.0)
                rec = _record("daughter_singularity", ratio, (m, n2, t2))
                total += int(ok.sum())
                if worst is None or rec.worst_ratio > worst.worst_ratio:
                    worst = rec
            worst.samples = total
            records.append(worst)
    else:
        records.append(HypothesisRecord(
            "daughter_singularity", "not-applicable", required=False,
            detail="point-mass daughter distribution"))

    records.append(_record(
        "kernel_uniqueness", _safe_ratio(psi * (mu + nu) ** sig, np.full_like(psi, kernel.bound_k)),
        (mu, nu), required=require_uniqueness))
    return AssumptionReport(records)
