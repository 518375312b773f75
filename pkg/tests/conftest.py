from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from dquant.algebra_core import Poly
from dquant.moyal import FlatSymplectic

settings.register_profile(
    "dq",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("dq")

small_fracs = st.builds(Fraction, st.integers(-5, 5), st.integers(1, 4))


@st.composite
def polys(draw, names, max_deg=3, max_terms=4, complex_coeffs=False):
    d = len(names)
    n = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n):
        e = tuple(draw(st.lists(st.integers(0, max_deg), min_size=d, max_size=d)))
        if sum(e) > max_deg:
            continue
        c = draw(small_fracs)
        if complex_coeffs:
            from dquant.algebra_core import Scalar

            c = Scalar(c, draw(small_fracs))
        terms[e] = c
    return Poly.from_terms(names, terms)


@pytest.fixture
def fs1():
    return FlatSymplectic(1)


@pytest.fixture
def fs2():
    return FlatSymplectic(2)


@pytest.fixture
def so3():
    from dquant.polydiff import PoissonStructure

    names = ("x1", "x2", "x3")
    x = [Poly.var(names, i) for i in range(3)]
    z = Poly(names)
    return PoissonStructure(names, [[z, x[2], -x[1]], [-x[2], z, x[0]], [x[1], -x[0], z]])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(RESULTS):
        terminalreporter.write_line(line)
