import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from epsim import model as md

settings.register_profile(
    "ci", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


# gamma/g = 2, eps/g = 1, kappa/g = 0.5: the reference operating point used
# throughout the tests and the CLI defaults.
@pytest.fixture
def std_params() -> md.SystemParams:
    return md.SystemParams(g=1.0, gamma_a=2.5, gamma_b=1.5, eps=1.0, n_th=0.0)


@pytest.fixture
def thermal_params() -> md.SystemParams:
    return md.SystemParams(g=1.0, gamma_a=2.5, gamma_b=1.5, eps=1.0, n_th=0.1)


def valid_params(
    min_g=0.3, max_g=2.5, max_gamma=3.0, max_eps=1.5, max_n=0.5
) -> st.SearchStrategy[md.SystemParams]:
    finite = dict(allow_nan=False, allow_infinity=False)
    return st.builds(
        md.SystemParams,
        g=st.floats(min_value=min_g, max_value=max_g, **finite),
        gamma_a=st.floats(min_value=0.0, max_value=max_gamma, **finite),
        gamma_b=st.floats(min_value=0.0, max_value=max_gamma, **finite),
        eps=st.floats(min_value=0.0, max_value=max_eps, **finite),
        n_th=st.floats(min_value=0.0, max_value=max_n, **finite),
    )


def random_complex_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def assert_multiset_close(actual, desired, atol):
    """Compare complex eigenvalue multisets via optimal assignment."""
    from scipy.optimize import linear_sum_assignment

    actual = np.asarray(actual)
    desired = np.asarray(desired)
    assert actual.shape == desired.shape
    cost = np.abs(actual[:, None] - desired[None, :])
    rows, cols = linear_sum_assignment(cost)
    worst = cost[rows, cols].max()
    assert worst <= atol, f"multiset mismatch: worst pair distance {worst:.3e}"
