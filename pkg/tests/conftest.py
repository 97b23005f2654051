import pytest
from hypothesis import HealthCheck, settings

from sir_icu import REFERENCE_X0, SolverConfig, optimize_switching_time, reference_params

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref_params():
    return reference_params()


@pytest.fixture(scope="session")
def optimum():
    """Cached optimisations of the reference scenarios, keyed by lambda_i."""
    cache = {}

    def get(lambda_i: float):
        if lambda_i not in cache:
            cache[lambda_i] = optimize_switching_time(REFERENCE_X0, reference_params(lambda_i=lambda_i), SolverConfig())
        return cache[lambda_i]

    return get
