import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from kmtest.data import CensoredSample, TwoSampleData

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def random_sample(rng, n, censor_prob=0.3, label="", dim=0, ties=False):
    t = rng.exponential(1.0, n)
    if ties:
        t = np.round(t, 1)
    e = rng.random(n) >= censor_prob
    e[rng.integers(n)] = True
    cov = rng.normal(size=(n, dim)) if dim else None
    return CensoredSample(t, e, label, cov)


def random_data(rng, n0, n1, censor_prob=0.3, dim=0, ties=False):
    return TwoSampleData(
        random_sample(rng, n0, censor_prob, "0", dim, ties),
        random_sample(rng, n1, censor_prob, "1", dim, ties),
    )


@st.composite
def censored_samples(draw, min_size=1, max_size=30):
    n = draw(st.integers(min_size, max_size))
    times = draw(st.lists(st.floats(0, 100, allow_nan=False, allow_subnormal=False), min_size=n, max_size=n))
    events = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return CensoredSample(times, events)


@st.composite
def two_sample_data(draw, max_size=20, with_events=True):
    groups = []
    for label in ("0", "1"):
        s = draw(censored_samples(1, max_size))
        if with_events and s.n_events == 0:
            ev = np.array(s.event)
            ev[draw(st.integers(0, len(s) - 1))] = True
            s = CensoredSample(s.time, ev, label)
        groups.append(CensoredSample(s.time, s.event, label))
    return TwoSampleData(*groups)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
