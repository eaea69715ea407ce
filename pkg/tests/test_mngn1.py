import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rbq.distributions import Deterministic, Erlang, Exponential
from rbq.errors import DomainError, InstabilityError, NumericError
from rbq.mngn1 import MnGn1Model, first_arrival_prob, residuals_mngn1, steady_state_mngn1
from rbq.schedule import RateSchedule
from rbq.transforms import S_GRID

from strategies import distributions

GRID5 = (0.25, 0.5, 1.0, 2.0, 4.0)


@st.composite
def mngn1_models(draw):
    tail = draw(distributions)
    lam_tail = draw(st.floats(0.1, 0.85)) / tail.mean
    head = tuple(draw(st.lists(distributions, max_size=3)))
    lam_head = tuple(draw(st.lists(st.floats(0.2, 3.0), max_size=3)))
    return MnGn1Model(RateSchedule(lam_head, lam_tail, 0), head, tail)


def test_exponential_services_memoryless():
    m = MnGn1Model(RateSchedule((0.5, 2.0), 1.0, 0), (), Exponential(2.0))
    for R in residuals_mngn1(m, 10):
        for s in GRID5:
            assert R.eval(s) == pytest.approx(2 / (2 + s), abs=1e-12)


def test_first_residual_is_d_operator(oracle_values):
    m = MnGn1Model(RateSchedule((), 1.0, 0), (Deterministic(1.0),), Deterministic(1.0))
    R1 = residuals_mngn1(m, 1)[0]
    assert R1.eval(2.0) == pytest.approx(oracle_values["d_lst_det1_lam1_s2"], abs=1e-10)


def test_residuals_stabilise():
    m = MnGn1Model(RateSchedule((), 1.0, 0), (), Erlang(2, 4.0))
    rs = residuals_mngn1(m, 40)
    diffs = [max(abs(rs[n + 1].eval(s) - rs[n].eval(s)) for s in GRID5) for n in range(39)]
    tail = [d for d in diffs if d > 1e-15]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(tail, tail[1:]))
    assert diffs[-1] < 1e-6


def test_first_arrival_prob():
    m = MnGn1Model(RateSchedule((), 1.0, 0), (Exponential(1.0), Exponential(1.0)), Deterministic(2.0))
    assert first_arrival_prob(m, 2) == pytest.approx(0.5)
    assert first_arrival_prob(m, 3) == pytest.approx(1 - math.exp(-2))
    with pytest.raises(DomainError):
        first_arrival_prob(m, 1)


def test_steady_state_examples(oracle_values):
    mm1 = steady_state_mngn1(MnGn1Model(RateSchedule((), 1.0, 0), (), Exponential(2.0)))
    assert mm1.pi_n[:40] == pytest.approx(0.5 ** np.arange(1, 41), abs=1e-10)
    det = steady_state_mngn1(MnGn1Model(RateSchedule((), 1.0, 0), (), Deterministic(0.5)))
    assert det.pi_n[0] == pytest.approx(0.5, abs=1e-12)
    assert det.pi_n[:30] == pytest.approx(oracle_values["mg1_det05_lam1"], abs=1e-6)
    erl = steady_state_mngn1(MnGn1Model(RateSchedule((), 1.0, 0), (), Erlang(2, 4.0)))
    assert erl.pi_n[:30] == pytest.approx(oracle_values["mg1_erlang24_lam1"], abs=1e-6)


def test_instability():
    with pytest.raises(InstabilityError):
        steady_state_mngn1(MnGn1Model(RateSchedule((), 1.0, 0), (), Deterministic(1.5)))


def test_slow_head_service_does_not_stabilise():
    # a slow early service keeps a positive share of the residual law at every level, and the
    # ratios approach their limit by a factor of about 0.98 per level: an explicit failure is expected
    m = MnGn1Model(RateSchedule((), 0.7872515882602742, 0),
                   (Exponential(4.491535913746268), Exponential(1.4440925033821175)),
                   Exponential(2.269061652469925))
    with pytest.raises(NumericError, match="did not stabilise"):
        steady_state_mngn1(m, n_max=200)


@settings(max_examples=25)
@given(mngn1_models())
def test_balance_and_transforms(m):
    try:
        sol = steady_state_mngn1(m, n_max=150)
    except NumericError as exc:
        assert "did not stabilise" in str(exc)
        assume(False)
    pi = sol.pi_n
    assert math.fsum(pi) == pytest.approx(1.0, abs=1e-8)
    top = min(len(sol.residuals), 30)
    for n in range(1, top + 1):
        lam_n = m.arrival_rate(n)
        prev = m.service(1).lst(lam_n) if n == 1 else sol.residual(n - 1).eval(lam_n)
        up = pi[n - 1] * m.arrival_rate(n - 1) * (1 - prev)
        down = pi[n] * lam_n * m.service(n).lst(lam_n)
        assert abs(up - down) <= 1e-9 * max(up, down)
    for R in sol.residuals[:10]:
        v = R.eval(np.asarray(S_GRID[::10]))
        assert v[0] == pytest.approx(1.0, abs=1e-10)
        assert np.all(np.diff(v) <= 1e-12) and np.all((v >= -1e-12) & (v <= 1 + 1e-12))


@given(st.lists(st.floats(0.2, 3.0), max_size=4), st.floats(0.2, 3.0), st.floats(0.2, 0.9))
def test_exponential_collapse(head, tail_lam, rho):
    mu = tail_lam / rho
    m = MnGn1Model(RateSchedule(tuple(head), tail_lam, 0), (), Exponential(mu))
    pi = steady_state_mngn1(m).pi_n
    for n in range(1, 15):
        assert pi[n] / pi[n - 1] == pytest.approx(m.arrival_rate(n - 1) / mu, abs=1e-10)
