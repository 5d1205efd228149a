import numpy as np
import pytest

from conelab import jacobi as J
from conelab import kernels as K
from conelab import profile as P


@pytest.fixture(scope="session")
def interaction_constant():
    return K.compute_a_star(1e-10)


@pytest.fixture(scope="session")
def correction_kernels():
    return K.build_correction_kernels(T_ker=25.0, quad_tol=1e-10, dt=0.0025)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture(scope="session")
def curve44():
    return P.integrate_profile(P.make_params(4, 4), s_max=200.0, tol=1e-10)


@pytest.fixture(scope="session")
def coefs44(curve44):
    return P.coefficients(curve44)


@pytest.fixture(scope="session")
def frame44(coefs44):
    return J.build_ef_frame(coefs44)


@pytest.fixture(scope="session")
def pair44(curve44, frame44):
    return J.build_jacobi_pair(curve44, frame44)
