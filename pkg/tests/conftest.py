import numpy as np
import pytest

from streamsparse.glm import GlmFamily

FAMILIES = {
    "gaussian": GlmFamily.gaussian(),
    "logistic": GlmFamily.logistic(),
    "poisson": GlmFamily.poisson(),
}


@pytest.fixture(params=sorted(FAMILIES))
def family(request):
    return FAMILIES[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_response(family, X, beta, rng):
    eta = X @ beta
    if family.kind.value == "gaussian":
        return eta + rng.standard_normal(len(eta))
    if family.kind.value == "logistic":
        return (rng.random(len(eta)) < 1 / (1 + np.exp(-eta))).astype(float)
    return rng.poisson(np.exp(eta)).astype(float)
