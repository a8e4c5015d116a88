import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260824)


def make_dataset(rng, count, dim, kind="random"):
    """Synthetic datasets: iid Gaussian, clustered bundles, or tie-heavy."""
    if kind == "random":
        return rng.normal(size=(count, dim)).astype(np.float32)
    if kind == "clustered":
        n_clusters = 10
        centers = rng.normal(size=(n_clusters, dim)) * 5.0
        labels = rng.integers(0, n_clusters, size=count)
        return (centers[labels] + rng.normal(scale=0.5, size=(count, dim))).astype(
            np.float32
        )
    if kind == "ties":
        data = rng.normal(size=(count, dim)).astype(np.float32)
        n_dup = max(2, count // 10)
        data[1 : 1 + n_dup] = data[0]  # a block of exact duplicates
        return data
    raise ValueError(kind)
