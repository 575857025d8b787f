import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from webprof.features import FeatureVector
from webprof.logdata import Transaction


def make_tx(ts=1000, user="user_a", host="host_0", action="GET",
            scheme="HTTP", category="Games", media="text/html",
            app="Steam", reputation="Minimal", private=False):
    return Transaction(
        timestamp=ts, user_id=user, host_id=host, http_action=action,
        uri_scheme=scheme, category=category, media_type=media,
        application_type=app, reputation=reputation,
        is_private_destination=private,
    )


def random_vectors(rng: np.random.Generator, n: int, dim: int):
    """Dense-ish random feature vectors with values in [0, 1]."""
    return [FeatureVector(dim, {i: float(v) for i, v in enumerate(rng.random(dim))})
            for _ in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
