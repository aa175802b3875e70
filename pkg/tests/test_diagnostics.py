import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from coagbreak import (
    DomainError,
    InitialCondition,
    State,
    bound_certificate,
    build_grid,
    check_bound,
    contraction_rate,
    moment,
    s_norm,
    tail_mass,
    truncate_initial,
    weighted_distance,
)
from coagbreak.diagnostics import default_exponents
from coagbreak.integrator import Trajectory


def test_certificate_frozen_values():
    c = bound_certificate(1.0, 1.0, 0.0, 0.2, 2.0, 0.0)
    assert (c.a, c.b, c.P1, c.P) == (2.0, 1.0, 1.0, 5.0)


def test_certificate_growth():
    c = bound_certificate(1.0, 1.0, 0.0, 0.2, 2.0, 1.0)
    e = math.exp(2.0)
    assert c.P1 == pytest.approx(e + 0.5 * (e - 1))
    assert c.P == pytest.approx(2 * c.P1 + 3)


def test_certificate_zero_rate_limit():
    c = bound_certificate(0.0, 1.0, 0.0, 0.2, 2.0, 3.0)
    assert c.P == 0.0


def test_certificate_overflow_is_infinite():
    c = bound_certificate(10.0, 10.0, 0.5, 0.2, 15.0, 100.0)
    assert math.isinf(c.P)


def test_certificate_needs_eta():
    with pytest.raises(DomainError):
        bound_certificate(1.0, 1.0, 0.0, 0.2, None, 1.0)


def test_contraction_rate_value():
    assert contraction_rate(1.0, 1.0, 1.0, 2.0) == 7.0


def test_norm_of_exponential():
    g = build_grid(1e4, 32)
    s = truncate_initial(InitialCondition(), g)
    ref, _ = integrate.quad(lambda m: (1 + m + m**-0.4) * np.exp(-m), 1e-4, 1e4,
                            points=[1e-3, 1e-2, 0.1, 1, 10])
    assert s_norm(s, g, 0.2) == pytest.approx(ref, rel=1e-3)
    # full half-line value 2 + Gamma(0.6)
    assert 2 + math.gamma(0.6) == pytest.approx(3.4892, abs=1e-4)


def test_moments_of_exponential():
    g = build_grid(1e4, 32)
    s = truncate_initial(InitialCondition(), g)
    assert moment(s, g, 0.0) == pytest.approx(1.0, rel=1e-3)
    assert moment(s, g, 1.0) == pytest.approx(1.0, rel=1e-3)


def test_default_exponents():
    assert default_exponents(0.2) == (-0.4, -0.2, 0.0, 1.0)
    assert default_exponents(0.2, (2, 1)) == (-0.4, -0.2, 0.0, 1.0, 2.0)


def test_tail_majorant_holds_for_exponential():
    g = build_grid(1e3, 8)
    s = truncate_initial(InitialCondition(), g)
    for lam in (0.5, 1.0, 10.0):
        val, bound = tail_mass(s, g, lam, 0.2, moment(s, g, 1.0))
        assert 0 < val <= bound


def test_tail_rejects_bad_lambda():
    with pytest.raises(DomainError):
        tail_mass(np.ones(2), build_grid(10.0, 1), 0.0, 0.2)


def test_check_bound_flags_violation():
    g = build_grid(10.0, 1)
    states = [State(0.01 * np.ones(2), 0.0), State(np.ones(2), 1.0)]
    tr = Trajectory(np.array([0.0, 1.0]), states, [], np.zeros(2))
    # k = 0 leaves P = 5 |g(0)|, far below the norm of the second state
    cert = bound_certificate(s_norm(states[0], g, 0.2), 0.0, 0.0, 0.2, 2.0, 1.0)
    chk = check_bound(tr, cert, g, 0.2)
    assert not chk.passed and chk.first_violation == 1.0
    assert chk.min_margin < 0


states = st.lists(st.floats(0, 1e3), min_size=8, max_size=8).map(np.array)


@settings(max_examples=100, deadline=None)
@given(states, states, states)
def test_distance_is_a_metric(a, b, c):
    g = build_grid(10.0, 4)
    d = lambda u, v: weighted_distance(u, v, g, 0.2)  # noqa: E731
    assert d(a, a) == 0.0
    assert d(a, b) == pytest.approx(d(b, a))
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9 * (1 + d(a, c))


@settings(max_examples=100, deadline=None)
@given(states, st.floats(0, 10))
def test_norm_homogeneous(a, c):
    g = build_grid(10.0, 4)
    assert s_norm(c * a, g, 0.2) == pytest.approx(c * s_norm(a, g, 0.2), rel=1e-12, abs=1e-300)
