import numpy as np
import pytest

from conftest import make_bundles, partitions_equal
from subdiar.clustering import (
    ClusterLabels,
    affinity_matrix,
    ahc,
    estimate_k_eigengap,
    spectral_cluster,
)


class TestAffinityMatrix:
    def test_single_embedding(self):
        A = affinity_matrix([np.array([0.3, 0.4])])
        np.testing.assert_array_equal(A, [[1.0]])

    def test_orthogonal_vectors(self):
        A = affinity_matrix([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        np.testing.assert_allclose(A, [[1.0, 0.0], [0.0, 1.0]])

    def test_antipodal_clipped_to_zero(self):
        A = affinity_matrix([np.array([1.0, 0.0]), np.array([-1.0, 0.0])])
        np.testing.assert_allclose(A, [[1.0, 0.0], [0.0, 1.0]])

    def test_symmetric_unit_diagonal_in_range(self, rng):
        X = rng.normal(size=(12, 6))
        A = affinity_matrix(X)
        np.testing.assert_array_equal(A, A.T)
        np.testing.assert_array_equal(np.diag(A), np.ones(12))
        assert A.min() >= 0.0 and A.max() <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            affinity_matrix([])


class TestAhc:
    def test_single_embedding(self):
        labels = ahc([np.array([1.0, 0.0])], stop_threshold=0.5)
        assert labels.labels == {0: 1} and labels.n == 1

    def test_two_orthogonal_bundles(self):
        v = np.array([1.0, 0.0])
        u = np.array([0.0, 1.0])
        labels = ahc([v, v, v, u, u, u], stop_threshold=0.5)
        assert labels.n == 2
        assert len({labels.labels[i] for i in (0, 1, 2)}) == 1
        assert len({labels.labels[i] for i in (3, 4, 5)}) == 1
        assert labels.labels[0] != labels.labels[3]

    def test_threshold_above_one_rejected(self):
        with pytest.raises(ValueError):
            ahc([np.array([1.0, 0.0])], stop_threshold=1.0 + 1e-9)

    def test_threshold_minus_one_merges_everything(self, rng):
        X = rng.normal(size=(7, 4))
        labels = ahc(X, stop_threshold=-1.0)
        assert labels.n == 1

    def test_recovers_bundles(self, rng):
        X, truth = make_bundles(rng, 4, sizes=[3, 2, 4, 1])
        labels = ahc(X, stop_threshold=0.5)
        got = {i: labels.labels[i] for i in range(len(X))}
        want = {i: t for i, t in enumerate(truth)}
        assert partitions_equal(got, want)

    def test_order_invariance_up_to_relabeling(self, rng):
        X, _ = make_bundles(rng, 3, sizes=[3, 3, 2])
        labels = ahc(X, stop_threshold=0.5)
        perm = rng.permutation(len(X))
        shuffled = ahc(X[perm], stop_threshold=0.5, ids=[int(p) for p in perm])
        assert partitions_equal(labels.labels, shuffled.labels)

    def test_positive_scaling_invariance(self, rng):
        X, _ = make_bundles(rng, 3)
        a = ahc(X, stop_threshold=0.5)
        b = ahc(3.7 * X, stop_threshold=0.5)
        assert a.labels == b.labels


class TestEigengap:
    def test_hand_gap_inspection(self):
        assert estimate_k_eigengap([0.0, 0.0, 0.0, 0.9, 1.0], k_max=10) == 3

    def test_single_gap(self):
        assert estimate_k_eigengap([0.0, 1.0], k_max=10) == 1

    def test_k_max_one_caps(self):
        assert estimate_k_eigengap([0.0, 0.0, 0.9, 1.0], k_max=1) == 1

    def test_short_input_returns_one(self):
        assert estimate_k_eigengap([0.5], k_max=10) == 1

    def test_tie_breaks_to_smaller_position(self):
        assert estimate_k_eigengap([0.0, 0.5, 1.0], k_max=10) == 1


class TestSpectral:
    def test_single_embedding(self):
        labels = spectral_cluster([np.array([1.0, 0.0])])
        assert labels.labels == {0: 1} and labels.n == 1

    def test_identical_embeddings_k1(self):
        v = np.array([0.6, 0.8])
        labels = spectral_cluster([v, v, v], k=1)
        assert labels.n == 1

    def test_k_given_recovers_partition(self, rng):
        X, truth = make_bundles(rng, 5, sizes=[3, 4, 2, 3, 3])
        labels = spectral_cluster(X, k=5)
        got = {i: labels.labels[i] for i in range(len(X))}
        want = {i: t for i, t in enumerate(truth)}
        assert partitions_equal(got, want)

    def test_eigengap_estimates_k(self, rng):
        X, truth = make_bundles(rng, 4, sizes=[4, 3, 5, 2])
        labels = spectral_cluster(X, k=None, k_max=20)
        assert labels.n == 4
        got = {i: labels.labels[i] for i in range(len(X))}
        want = {i: t for i, t in enumerate(truth)}
        assert partitions_equal(got, want)

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(ValueError):
            spectral_cluster([np.array([1.0, 0.0])], k=2)

    def test_deterministic_given_seed(self, rng):
        X, _ = make_bundles(rng, 3, sizes=[4, 4, 4])
        a = spectral_cluster(X, k=3, seed=7)
        b = spectral_cluster(X, k=3, seed=7)
        assert a == b

    def test_order_invariance_up_to_relabeling(self, rng):
        X, _ = make_bundles(rng, 3, sizes=[4, 3, 3])
        labels = spectral_cluster(X, k=3)
        perm = rng.permutation(len(X))
        shuffled = spectral_cluster(X[perm], k=3, ids=[int(p) for p in perm])
        assert partitions_equal(labels.labels, shuffled.labels)

    def test_positive_scaling_invariance(self, rng):
        X, _ = make_bundles(rng, 3)
        a = spectral_cluster(X, k=3)
        b = spectral_cluster(0.25 * X, k=3)
        assert a.labels == b.labels


def _components_oracle(X, threshold=0.5):
    """Independent oracle: connected components of the high-similarity graph."""
    n = len(X)
    Xn = X / np.linalg.norm(X, axis=1)[:, None]
    S = Xn @ Xn.T
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if S[i, j] > threshold:
                parent[find(i)] = find(j)
    return {i: find(i) for i in range(n)}


class TestSmallInstanceOracle:
    def test_both_clusterers_match_components_oracle(self, rng):
        # Bundles of >= 2 points so the eigengap has a gap to find; the
        # all-singleton degenerate case is covered below with k given.
        for _ in range(30):
            n_bundles = int(rng.integers(1, 5))
            sizes = rng.integers(2, 4, size=n_bundles)
            while sizes.sum() > 8:
                sizes = rng.integers(2, 4, size=n_bundles)
            X, _ = make_bundles(rng, n_bundles, sizes=sizes, dim=16, noise=0.01)
            oracle = _components_oracle(X)
            got_ahc = ahc(X, stop_threshold=0.5)
            assert partitions_equal(dict(got_ahc.labels), oracle)
            got_spec = spectral_cluster(X, k=None, k_max=8)
            assert partitions_equal(dict(got_spec.labels), oracle)

    def test_singleton_bundles_with_k_given(self, rng):
        # An all-singleton instance has no eigengap signal (every Laplacian
        # eigenvalue is near zero), so k must come from the caller; AHC's
        # threshold handles it without help.
        for _ in range(10):
            n = int(rng.integers(2, 7))
            X, _ = make_bundles(rng, n, sizes=[1] * n, dim=16, noise=0.01)
            oracle = _components_oracle(X)
            assert partitions_equal(dict(ahc(X, stop_threshold=0.5).labels), oracle)
            assert partitions_equal(dict(spectral_cluster(X, k=n).labels), oracle)


class TestClusterLabels:
    def test_gap_in_labels_rejected(self):
        with pytest.raises(ValueError):
            ClusterLabels(labels={0: 1, 1: 3}, n=3)

    def test_members_sorted(self):
        labels = ClusterLabels(labels={4: 1, 2: 1, 7: 2}, n=2)
        assert labels.members(1) == [2, 4]
