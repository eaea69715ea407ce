"""Hypothesis strategies for distributions and models."""

from hypothesis import strategies as st

from rbq.distributions import Deterministic, Erlang, Exponential, HyperExponential, Uniform

rates = st.floats(0.2, 5.0)


@st.composite
def hyperexponentials(draw):
    k = draw(st.integers(1, 3))
    w = [draw(st.floats(0.05, 1.0)) for _ in range(k)]
    total = sum(w)
    probs = [x / total for x in w]
    probs[-1] = 1.0 - sum(probs[:-1])
    return HyperExponential(tuple(probs), tuple(draw(rates) for _ in range(k)))


@st.composite
def uniforms(draw):
    lo = draw(st.floats(0.0, 2.0))
    return Uniform(lo, lo + draw(st.floats(0.1, 2.0)))


distributions = st.one_of(
    rates.map(Exponential),
    st.floats(0.2, 3.0).map(Deterministic),
    st.builds(Erlang, st.integers(1, 5), rates),
    hyperexponentials(),
    uniforms(),
)
