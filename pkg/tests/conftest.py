import math

import pytest
from hypothesis import HealthCheck, settings

from disconj.ode import Equation

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def eq(p, q, params=None, **kw):
    return Equation.from_text(p, q, params, **kw)


@pytest.fixture
def harmonic():
    return eq("0", "1")


@pytest.fixture
def rational_b1():
    return eq("-(2*(2*t-b))/(t^2+(t-b)^2)", "4/(t^2+(t-b)^2)", {"b": 1.0})


@pytest.fixture
def cosh_a2():
    return eq("-(A*sinh(t))/(A*cosh(t)-1)", "1/(A*cosh(t)-1)", {"A": 2.0})


@pytest.fixture
def sine_ratio():
    return eq("0", "sin(t)/(2+sin(t))")


@pytest.fixture
def osc():
    return eq("-t/2", "t^2/16")


@pytest.fixture
def bell():
    return eq("t", "t^2/4+1/2")


TWO_PI = 2 * math.pi
