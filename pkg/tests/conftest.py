import numpy as np
import pytest

from qpath_ais import GaussianSpec, StudentTSpec, make_gaussian, make_student_t


@pytest.fixture(scope="session")
def gaussian_pair():
    """The two-Gaussian annealing testbed used throughout."""
    return make_gaussian(GaussianSpec(-4.0, 3.0)), make_gaussian(GaussianSpec(4.0, 1.0))


@pytest.fixture(scope="session")
def student_pair():
    """Heavy-tailed endpoints with dof 1 and the same location/scale pair."""
    return (
        make_student_t(StudentTSpec(-4.0, 3.0, 1.0)),
        make_student_t(StudentTSpec(4.0, 1.0, 1.0)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
