import numpy as np
import pytest

from nhknots.lattice import ModelParams

# representative points of the five phases at t2 = 2
POINTS = {"a": 0.1, "b": 0.25, "c": 0.7, "d": 1.2, "e": 1.4}


@pytest.fixture
def base():
    return ModelParams(t1=1.0, t2=2.0, t3=1.0, t4=1.0, lam=0.0, mu=0.5, q=1)


def random_params(rng, q_max=2, hermitian=False, t1_eq_t3=False):
    t = rng.uniform(0.2, 2.0, size=4)
    if t1_eq_t3:
        t[2] = t[0]
    return ModelParams(
        t1=t[0], t2=t[1], t3=t[2], t4=t[3],
        lam=0.0 if hermitian else rng.uniform(-1.5, 1.5),
        mu=rng.uniform(-1.0, 1.0),
        q=int(rng.integers(1, q_max + 1)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
