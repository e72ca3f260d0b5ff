import pytest

from vds.hsspec import decompose, gauss_rule
from vds.specfun import Params
from vds.vdcore import Coupling

GENERIC_REAL = [-0.6, -0.35, -0.2, -0.3, 0.05, -0.25, 0.1, -0.25]
GENERIC_MIXED = [-0.5, -0.2, -0.1, 0.1, -0.3, -0.2, 0.05, -0.35]


@pytest.fixture(scope="session")
def p():
    return Params(1.0, 0.7, 1.1)


@pytest.fixture(scope="session")
def rule(p):
    return gauss_rule(p, 200)


@pytest.fixture(scope="session")
def g_real(p):
    return Coupling.real(p, GENERIC_REAL)


@pytest.fixture(scope="session")
def g_mixed(p):
    return Coupling.mixed(p, GENERIC_MIXED)


@pytest.fixture(scope="session")
def dec_real(g_real, rule):
    return decompose(g_real, rule)


@pytest.fixture(scope="session")
def dec_mixed(g_mixed, rule):
    return decompose(g_mixed, rule)
