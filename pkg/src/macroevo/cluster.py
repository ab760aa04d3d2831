"""k-means (k-means++ seeding, Lloyd iterations) and the silhouette score."""

from __future__ import annotations

import numpy as np


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of k seed points; the next seed is drawn with probability ~ D^2."""
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a seed: pick any unused index
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return np.array(chosen)


def kmeans(vectors, k: int, seed=0, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cluster rows of ``vectors`` into ``k`` groups; returns (labels, centroids).

    Stops when assignments no longer change or after ``max_iter`` Lloyd
    steps. An emptied cluster keeps its previous centroid.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError("vectors must be a 2-D array")
    if not 1 <= k <= len(x):
        raise ValueError(f"k={k} must be between 1 and the number of vectors ({len(x)})")
    rng = _as_rng(seed)
    centroids = x[kmeans_pp_init(x, k, rng)].copy()
    labels = np.full(len(x), -1)
    for _ in range(max_iter):
        d = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d, axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
    return labels, centroids


def silhouette(x, labels) -> float:
    """Mean silhouette over all samples with Euclidean distance.

    Samples in singleton clusters score 0. Undefined (NaN) unless there are
    between 2 and n-1 distinct labels.
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if not 2 <= len(uniq) <= len(x) - 1:
        return float("nan")
    d = np.sqrt(np.clip(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2), 0, None))
    onehot = labels[:, None] == uniq[None, :]
    sizes = onehot.sum(axis=0)
    sums = d @ onehot
    own = np.argmax(onehot, axis=1)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(len(x)), own] / np.maximum(own_size - 1, 1), 0.0)
    mean_other = sums / sizes[None, :]
    mean_other[np.arange(len(x)), own] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_size > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())
