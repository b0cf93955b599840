"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from historeg import ImageMeta, MatchSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def meta_1000():
    return ImageMeta(1000, 1000)


def make_affine_matches(n, linear, offset, seed=0, span=1000.0):
    """Matches whose dst are uniform in [0, span)² and whose src follow
    src = linear @ dst + offset exactly."""
    gen = np.random.default_rng(seed)
    dst = gen.uniform(0.0, span, size=(n, 2))
    src = dst @ np.asarray(linear, dtype=float).T + np.asarray(offset, dtype=float)
    return MatchSet(src, dst)
