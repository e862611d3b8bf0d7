"""Unsupervised clustering of face and timbre embeddings.

Two interchangeable clusterers: average-linkage agglomerative clustering on
cosine similarity with a stop threshold, and spectral clustering on the
symmetric-normalized Laplacian with eigengap cluster-count estimation and a
seeded k-means. Both are deterministic; ties break toward smaller indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Embedding

DEFAULT_KMEANS_SEED = 1031
_KMEANS_RESTARTS = 50
_KMEANS_TOL = 1e-8
_KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class ClusterLabels:
    """A complete labeling of items into clusters 1..n (no gaps)."""

    labels: dict[int, int]
    n: int

    def __post_init__(self):
        used = set(self.labels.values())
        if self.labels and used != set(range(1, self.n + 1)):
            raise ValueError(f"labels must cover 1..{self.n} with no gaps, got {sorted(used)}")
        if not self.labels and self.n != 0:
            raise ValueError("empty labeling must have n == 0")

    def members(self, cluster: int) -> list[int]:
        return sorted(k for k, v in self.labels.items() if v == cluster)


def _stack(embs: Sequence[Embedding]) -> np.ndarray:
    if len(embs) == 0:
        raise ValueError("clustering requires at least one embedding")
    X = np.asarray(embs, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("embeddings must share one dimension")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm embedding cannot be clustered")
    return X / norms[:, None]


def affinity_matrix(embs: Sequence[Embedding]) -> np.ndarray:
    """Pairwise cosine similarities clipped at 0, with unit diagonal."""
    Xn = _stack(embs)
    A = Xn @ Xn.T
    A = (A + A.T) / 2.0
    np.clip(A, 0.0, 1.0, out=A)
    np.fill_diagonal(A, 1.0)
    return A


def _labels_from_partition(partition: list[list[int]], ids: Sequence[int]) -> ClusterLabels:
    """Number clusters 1..k by their smallest member position."""
    ordered = sorted(partition, key=min)
    labels: dict[int, int] = {}
    for cluster_no, members in enumerate(ordered, start=1):
        for pos in members:
            labels[ids[pos]] = cluster_no
    return ClusterLabels(labels=labels, n=len(ordered))


def ahc(
    embs: Sequence[Embedding],
    stop_threshold: float,
    ids: Sequence[int] | None = None,
) -> ClusterLabels:
    """Average-linkage agglomeration on cosine similarity.

    Repeatedly merges the pair of clusters with the highest average pairwise
    cosine similarity; stops when the best inter-cluster similarity drops
    below ``stop_threshold``. Ties break toward the smallest cluster-index
    pair, so the result is deterministic.
    """
    if not -1.0 <= stop_threshold <= 1.0:
        raise ValueError(f"stop threshold must be in [-1, 1], got {stop_threshold}")
    Xn = _stack(embs)
    n = Xn.shape[0]
    if ids is None:
        ids = list(range(n))

    S = Xn @ Xn.T
    S = (S + S.T) / 2.0
    # sim[i, j] is the average pairwise similarity between clusters i and j;
    # only the upper triangle of live clusters is consulted.
    sim = S.copy()
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    mask = np.full((n, n), -np.inf)
    iu = np.triu_indices(n, k=1)
    mask[iu] = sim[iu]

    while len(members) > 1:
        flat = int(np.argmax(mask))
        i, j = divmod(flat, n)
        best = mask[i, j]
        if best < stop_threshold:
            break
        si, sj = len(members[i]), len(members[j])
        # Lance-Williams update for average linkage.
        for k in members:
            if k == i or k == j:
                continue
            merged = (si * sim[i, k] + sj * sim[j, k]) / (si + sj)
            sim[i, k] = sim[k, i] = merged
            lo, hi = (i, k) if i < k else (k, i)
            mask[lo, hi] = merged
        members[i].extend(members[j])
        del members[j]
        mask[j, :] = -np.inf
        mask[:, j] = -np.inf
        mask[i, j] = -np.inf

    return _labels_from_partition(list(members.values()), ids)


def estimate_k_eigengap(eigenvalues: Sequence[float], k_max: int) -> int:
    """Pick the cluster count at the largest ascending-eigenvalue gap.

    Considers gaps at positions 1 <= j < min(k_max, len); ties break toward
    the smaller position. Returns 1 when no gap positions exist.
    """
    vals = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(np.diff(vals) < -1e-9):
        raise ValueError("eigenvalues must be sorted ascending")
    hi = min(k_max, vals.size)
    if vals.size < 2 or hi < 2:
        return 1
    gaps = vals[1:hi] - vals[: hi - 1]
    return int(np.argmax(gaps)) + 1


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _kmeans(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means with k-means++ init and multiple restarts."""
    n = X.shape[0]
    best_labels: np.ndarray | None = None
    best_inertia = np.inf
    for _ in range(_KMEANS_RESTARTS):
        centers = _kmeans_pp_init(X, k, rng)
        labels = np.zeros(n, dtype=int)
        for _ in range(_KMEANS_MAX_ITER):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = np.argmin(d2, axis=1)
            new_centers = centers.copy()
            for c in range(k):
                mask = labels == c
                if np.any(mask):
                    new_centers[c] = X[mask].mean(axis=0)
                else:
                    # Re-seed an empty cluster with the point farthest
                    # from its current center (first such point on ties).
                    worst = int(np.argmax(d2[np.arange(n), labels]))
                    new_centers[c] = X[worst]
            shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
            centers = new_centers
            if shift < _KMEANS_TOL:
                break
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    assert best_labels is not None
    return best_labels


def spectral_cluster(
    embs: Sequence[Embedding],
    k: int | None = None,
    k_max: int = 50,
    ids: Sequence[int] | None = None,
    seed: int = DEFAULT_KMEANS_SEED,
) -> ClusterLabels:
    """Spectral clustering on the symmetric-normalized Laplacian.

    Builds the clipped-cosine affinity, embeds points in the first k
    eigenvectors (row-normalized), and partitions them with seeded k-means.
    When k is not given it is estimated from the eigengap, capped by k_max.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    Xn = _stack(embs)
    n = Xn.shape[0]
    if ids is None:
        ids = list(range(n))
    if k is not None and not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if n == 1:
        return ClusterLabels(labels={ids[0]: 1}, n=1)

    A = affinity_matrix(Xn)
    d = A.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    L = np.eye(n) - (inv_sqrt[:, None] * A * inv_sqrt[None, :])
    L = (L + L.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(L)

    if k is None:
        k = estimate_k_eigengap(eigvals, k_max)
    if k == 1:
        return ClusterLabels(labels={i: 1 for i in ids}, n=1)

    U = eigvecs[:, :k]
    row_norms = np.linalg.norm(U, axis=1)
    row_norms[row_norms == 0] = 1.0
    U = U / row_norms[:, None]

    raw = _kmeans(U, k, np.random.default_rng(seed))
    partition: dict[int, list[int]] = {}
    for pos, lab in enumerate(raw):
        partition.setdefault(int(lab), []).append(pos)
    return _labels_from_partition(list(partition.values()), ids)
