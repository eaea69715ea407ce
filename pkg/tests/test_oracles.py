import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbq import oracles
from rbq.distributions import Deterministic, Erlang, Exponential, Uniform
from rbq.errors import DomainError, InstabilityError, RootBracketError, TailError
from rbq.schedule import RateSchedule

from strategies import distributions


def test_discrete_dist():
    d = oracles.DiscreteDist(np.array([0.25, 0.75]))
    assert d[1] == 0.75 and d[5] == 0.0 and len(d) == 2
    assert list(d.support) == [0, 1]
    with pytest.raises(DomainError):
        oracles.DiscreteDist(np.array([0.5, 0.6]))


def test_numeric_d_cdf_examples(oracle_values):
    F = Exponential(2.0)
    assert oracles.numeric_d_cdf(F, 3.0, 50.0) == pytest.approx(1.0, abs=1e-8)
    assert oracles.numeric_d_cdf(F, 3.0, math.log(2) / 2) == pytest.approx(0.5, abs=1e-8)
    mc = oracle_values["mc_residual"]["det1_lam1"]
    val = oracles.numeric_d_cdf(Deterministic(1.0), 1.0, 0.5)
    assert abs(val - mc["cdf_0.5"]) < 4 * mc["cdf_0.5_se"]
    # closed form for the deterministic case: (e^{-(1-w)} - e^{-1}) / (1 - e^{-1})
    assert val == pytest.approx((math.exp(-0.5) - math.exp(-1)) / (1 - math.exp(-1)), abs=1e-12)


@given(distributions, st.floats(0.3, 3.0))
def test_numeric_d_cdf_monotone(F, lam):
    ws = [0.0, 0.2, 0.7, 1.5, 4.0]
    c = [oracles.numeric_d_cdf(F, lam, w) for w in ws]
    assert all(b >= a - 1e-9 for a, b in zip(c, c[1:]))
    assert c[0] == pytest.approx(0.0, abs=1e-12)
    assert oracles.numeric_d_cdf(F, lam, 200 * F.mean + 50) == pytest.approx(1.0, abs=1e-7)


def test_numeric_d_cdf_domain():
    with pytest.raises(DomainError):
        oracles.numeric_d_cdf(Exponential(1.0), -1.0, 1.0)
    with pytest.raises(DomainError):
        oracles.numeric_d_cdf(Deterministic(1e-14), 1.0, 1.0)


def test_sigma_bisect():
    assert oracles.sigma_bisect(Exponential(1.0), 2.0) == pytest.approx(0.5, abs=1e-12)
    assert oracles.sigma_bisect(Deterministic(1.0), 1.5) == pytest.approx(0.41718835613419, abs=1e-12)
    with pytest.raises(RootBracketError):
        oracles.sigma_bisect(Exponential(2.0), 1.0)


def test_embedded_chain_gmc_examples(oracle_values):
    d = oracles.gmc_arrival_chain(Exponential(1.0), 1, 2.0)
    assert d.probs[:10] == pytest.approx(0.5 ** np.arange(1, 11), abs=1e-10)
    pi = oracles.embedded_chain_gmc(Deterministic(1.0), 1, 1.5).probs
    sigma = oracles.sigma_bisect(Deterministic(1.0), 1.5)
    ref = [1 / 3] + [(2 / 3) * (1 - sigma) * sigma ** (n - 1) for n in range(1, 20)]
    assert pi[:20] == pytest.approx(ref, abs=1e-8)
    mm2 = oracles.embedded_chain_gmc(Exponential(1.0), 2, 0.75).probs
    bd = oracles.birth_death_solve(RateSchedule.constant(1.0, 0), RateSchedule((0.75,), 1.5), 200).probs
    assert mm2[:30] == pytest.approx(bd[:30], abs=1e-10)


def test_embedded_chain_errors():
    with pytest.raises(InstabilityError):
        oracles.embedded_chain_gmc(Deterministic(1.0), 2, 0.4)
    with pytest.raises(TailError):
        oracles.embedded_chain_gmc(Deterministic(1.0), 1, 1.05, trunc=20)
    with pytest.raises(InstabilityError):
        oracles.embedded_chain_mg1(Deterministic(2.0), 1.0)


def test_birth_death_examples():
    p = oracles.birth_death_solve(RateSchedule.constant(1.0, 0), RateSchedule.constant(2.0), 200).probs
    assert p[:20] == pytest.approx(0.5 ** np.arange(1, 21), abs=1e-15)
    # M/M/2 closed form: pi_0 = (1 - r) / (1 + r) with r = lam / (2 mu)
    r = 1.0 / 1.5
    p = oracles.birth_death_solve(RateSchedule.constant(1.0, 0), RateSchedule((0.75,), 1.5), 200).probs
    p0 = (1 - r) / (1 + r)
    assert p[0] == pytest.approx(p0, abs=1e-14)
    assert p[3] == pytest.approx(p0 * 2 * r ** 3, abs=1e-14)
    p = oracles.birth_death_solve(RateSchedule.constant(1.0, 0), RateSchedule((2.0, 4.0), 4.0), 200).probs
    unnorm = [1.0, 0.5, 0.125] + [0.125 * 0.25 ** k for k in range(1, 198)]
    assert p[:50] == pytest.approx((np.array(unnorm) / math.fsum(unnorm))[:50], abs=1e-15)
    with pytest.raises(InstabilityError):
        oracles.birth_death_solve(RateSchedule.constant(2.0, 0), RateSchedule.constant(2.0))


def test_expect_matches_closed_form():
    for F in (Exponential(1.3), Erlang(3, 2.0), Uniform(0.2, 1.4), Deterministic(0.7)):
        assert oracles.expect(F, lambda t: math.exp(-0.8 * t)) == pytest.approx(F.lst(0.8), abs=1e-11)


def test_mc_residual():
    rng = np.random.default_rng(1)
    x = oracles.mc_residual(Exponential(2.0), 3.0, 100000, rng)
    assert x.size == 100000 and np.all(x >= 0)
    assert abs(x.mean() - 0.5) < 5 * x.std() / math.sqrt(x.size)
