import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbq import gm1, oracles
from rbq.distributions import Deterministic, Erlang, Exponential, Uniform
from rbq.errors import DomainError, InstabilityError
from rbq.gmn1 import (Gmn1Model, build_gmc, first_departure_prob, residuals_gmn1, reverse_step,
                      shift_model, steady_state_gmn1)
from rbq.schedule import RateSchedule
from rbq.transforms import S_GRID, d_operator

from strategies import distributions

GRID5 = (0.25, 0.5, 1.0, 2.0, 4.0)


@st.composite
def gmn1_models(draw):
    g = draw(distributions)
    lam = 1.0 / g.mean
    tail = lam / draw(st.floats(0.2, 0.85))
    head = tuple(draw(st.lists(st.floats(0.3, 3.0).map(lambda x: x * lam), max_size=4)))
    return Gmn1Model(g, RateSchedule(head, tail))


def test_constant_rates_reduce_to_gm1():
    g = Deterministic(1.0)
    m = Gmn1Model(g, RateSchedule((), 1.5))
    ref = gm1.steady_state(gm1.Gm1Model(g, 1.5))
    sol = steady_state_gmn1(m)
    for s in S_GRID:
        assert sol.residual(3).eval(s) == pytest.approx(ref.residual.eval(s), abs=1e-12)
    for n in range(20):
        assert sol.pi(n) == pytest.approx(ref.pi(n), abs=1e-10)
        assert sol.a(n) == pytest.approx(ref.a(n), abs=1e-10)


def test_constant_rates_fixed_point():
    g, mu = Erlang(2, 2.0), 1.6
    R = residuals_gmn1(Gmn1Model(g, RateSchedule((), mu)))[0]
    p = g.lst(mu)
    for s in S_GRID:
        rhs = (1 - p) * d_operator(g, mu).eval(s) + p * d_operator(R, mu).eval(s)
        assert R.eval(s) == pytest.approx(rhs, abs=1e-9)


def test_poisson_arrivals_memoryless():
    m = Gmn1Model(Exponential(1.0), RateSchedule((0.5, 3.0, 2.0), 2.5))
    for R in residuals_gmn1(m):
        for s in GRID5:
            assert R.eval(s) == pytest.approx(1 / (1 + s), abs=1e-12)


def test_mmn1_matches_birth_death(oracle_values):
    sol = steady_state_gmn1(Gmn1Model(Exponential(1.0), RateSchedule((2.0, 4.0), 4.0)))
    ref = oracle_values["mmn1_head24_tail4"]
    assert [sol.pi(n) for n in range(30)] == pytest.approx(ref, abs=1e-12)


def test_gmc_examples(oracle_values):
    assert build_gmc(Deterministic(1.0), 1, 1.5).mu == RateSchedule((), 1.5)
    assert build_gmc(Deterministic(1.0), 2, 0.75).mu == RateSchedule((0.75,), 1.5)
    with pytest.raises(InstabilityError):
        build_gmc(Deterministic(1.0), 2, 0.5)
    with pytest.raises(DomainError):
        build_gmc(Deterministic(1.0), 0, 0.5)
    mm2 = steady_state_gmn1(build_gmc(Exponential(1.0), 2, 0.75))
    assert [mm2.pi(n) for n in range(30)] == pytest.approx(oracle_values["mm2_lam1_mu075"], abs=1e-12)
    dm2 = steady_state_gmn1(build_gmc(Deterministic(1.0), 2, 0.75))
    pi = np.array([dm2.pi(n) for n in range(30)])
    assert pi == pytest.approx(np.array(oracle_values["dm2_mu075"]), abs=1e-9)
    # pi_n = C sigma^n from n = c on
    assert np.allclose(pi[3:] / pi[2:-1], dm2.sigma_tail, rtol=1e-9)


def test_first_departure_prob():
    m = Gmn1Model(Exponential(1.0), RateSchedule((1.0,), 2.0))
    assert first_departure_prob(m, 0) == pytest.approx(0.5)
    m = Gmn1Model(Deterministic(1.0), RateSchedule((1.0,), 2.0))
    assert first_departure_prob(m, 1) == pytest.approx(1 - math.exp(-2), abs=1e-15)
    assert first_departure_prob(m, 1) == pytest.approx(0.8647, abs=1e-4)


def test_shift_model_examples():
    m = Gmn1Model(Deterministic(1.0), RateSchedule((1.0, 2.0, 3.0), 4.0))
    assert shift_model(m, 0) == m
    assert shift_model(m, 2).mu == RateSchedule((3.0,), 4.0)
    assert shift_model(m, 5).mu == RateSchedule((), 4.0)


@given(gmn1_models(), st.integers(0, 3))
def test_shift_property(m, k):
    left = residuals_gmn1(shift_model(m, k))[0]
    right = residuals_gmn1(m)
    right = right[min(k, len(right) - 1)]
    for s in GRID5:
        assert left.eval(s) == pytest.approx(right.eval(s), abs=1e-9)


@given(gmn1_models())
def test_balance_identities(m):
    sol = steady_state_gmn1(m)
    lam, g = m.arrival_rate, m.inter_arrival
    a, pi = sol.a_n, sol.pi_n
    assert math.fsum(a) + a[-1] * sol.sigma_tail / (1 - sol.sigma_tail) == pytest.approx(1.0, abs=1e-10)
    top = min(len(a) - 1, m.head_length + 5)
    for n in range(1, top + 1):
        mu_n = m.rate(n)
        assert a[n - 1] * lam * g.lst(mu_n) == pytest.approx(
            a[n] * lam * (1 - sol.residual(n).eval(mu_n)), abs=1e-9)
        assert a[n - 1] * lam == pytest.approx(pi[n] * mu_n, abs=1e-9)
    for R in sol.residuals:
        v = R.eval(np.asarray(GRID5))
        assert np.all(np.diff(v) <= 1e-12) and np.all((v > 0) & (v <= 1 + 1e-12))


def test_reverse_direction():
    m = Gmn1Model(Erlang(2, 2.0), RateSchedule((0.8, 1.5, 1.2), 2.0))
    rs = residuals_gmn1(m)
    for n in range(len(rs) - 1):
        # exact density at zero of D(mu_{n+1}, R_{n+1}): lam F*(lam) / (1 - F*(lam))
        rate = m.rate(n + 1)
        at = rs[n + 1].eval(rate)
        up = reverse_step(m, rs[n], n, gamma=rate * at / (1 - at))
        for s in GRID5:
            assert up.eval(s) == pytest.approx(rs[n + 1].eval(s), abs=1e-7)
        approx = reverse_step(m, rs[n], n)
        for s in GRID5:
            assert approx.eval(s) == pytest.approx(rs[n + 1].eval(s), abs=1e-4)


def test_instability():
    with pytest.raises(InstabilityError):
        steady_state_gmn1(Gmn1Model(Uniform(0.0, 1.0), RateSchedule((5.0,), 2.0)))
