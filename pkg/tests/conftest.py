import numpy as np
import pytest

from delayed_bandits.distributions import UniformStream


@pytest.fixture
def stream():
    return UniformStream(12345)


def draw_many(law, n, seed=0):
    """n draws of a delay law or reward law through its uniform transform."""
    u = np.random.Generator(np.random.PCG64(seed)).random(n)
    f = law.from_uniform
    return [f(x) for x in u.tolist()]
