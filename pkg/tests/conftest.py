import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from repalign.data import EmbeddingSet, normalize_rows

settings.register_profile("repalign", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repalign")


@pytest.fixture(autouse=True)
def _quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def gaussian_set(n, d, seed, name="x", normalized=True):
    s = EmbeddingSet(name, np.random.default_rng(seed).normal(size=(n, d)))
    return normalize_rows(s) if normalized else s


@pytest.fixture
def make_set():
    return gaussian_set
