"""Shared test helpers: well-separated bundle instances and partition checks."""

import numpy as np
import pytest


def make_bundles(rng, n_bundles, sizes=None, dim=32, noise=0.01):
    """Points in near-orthogonal bundles (intra-cos >= ~0.95, inter <= ~0.05).

    Returns (embeddings, true_labels). Bundle directions are orthonormal, so
    inter-bundle cosine stays near 0 even after the small perturbation.
    """
    assert n_bundles <= dim
    basis = np.linalg.qr(rng.normal(size=(dim, dim)))[0].T[:n_bundles]
    if sizes is None:
        sizes = rng.integers(1, 6, size=n_bundles)
    points, labels = [], []
    for b in range(n_bundles):
        for _ in range(int(sizes[b])):
            v = basis[b] + rng.normal(0.0, noise, size=dim)
            points.append(v / np.linalg.norm(v))
            labels.append(b)
    return np.asarray(points), labels


def partitions_equal(labels_a, labels_b):
    """True when two labelings induce the same partition (up to renaming)."""
    if set(labels_a.keys()) != set(labels_b.keys()):
        return False
    mapping = {}
    reverse = {}
    for key in labels_a:
        a, b = labels_a[key], labels_b[key]
        if mapping.setdefault(a, b) != b:
            return False
        if reverse.setdefault(b, a) != a:
            return False
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
