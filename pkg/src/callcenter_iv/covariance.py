"""Sandwich covariance estimators: heteroskedasticity-robust, one-way and
two-way clustered.

Small-sample scaling is ``G/(G-1) * (n-1)/(n-k)`` for clustered variances
(``G`` is the smallest cluster count in the two-way case) and ``n/(n-k)``
for the robust variance, so that one-row clusters reproduce it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ClusterError(ValueError):
    pass


@dataclass
class Vcov:
    matrix: np.ndarray
    kind: str
    n_clusters: tuple[int, ...] = ()
    truncated: bool = False

    @property
    def df(self) -> int | None:
        """Reference degrees of freedom for clustered inference (``G - 1``)."""
        return min(self.n_clusters) - 1 if self.n_clusters else None


def cluster_meat(scores: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """``sum_g s_g s_g'`` with ``s_g`` the within-cluster score totals."""
    groups = np.unique(groups, return_inverse=True)[1]
    n_groups = groups.max() + 1 if groups.size else 0
    totals = np.column_stack([
        np.bincount(groups, weights=scores[:, j], minlength=n_groups)
        for j in range(scores.shape[1])
    ]) if scores.shape[1] else np.zeros((n_groups, 0))
    return totals.T @ totals


def intersect(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    pairs = np.stack([np.asarray(a), np.asarray(b)], axis=1)
    return np.unique(pairs, axis=0, return_inverse=True)[1].reshape(-1)


def psd_truncate(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((matrix + matrix.T) / 2)
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


def sandwich(bread: np.ndarray, scores: np.ndarray, clusters: Sequence[np.ndarray] = (),
             k: int | None = None, target: int | None = 0) -> Vcov:
    """``bread @ meat @ bread`` with cluster-summed score outer products.

    ``bread`` is the inverse Hessian (e.g. ``inv(X'X)``), ``scores`` the
    per-row contributions ``x_i * u_i``. ``k`` is the parameter count used in
    the ``(n-1)/(n-k)`` factor. With two cluster factors the meat is
    ``M_A + M_T - M_AT``; if that leaves a negative variance for ``target``
    (or any negative eigenvalue when ``target`` is None) the matrix is
    projected onto the PSD cone and ``truncated`` is set.
    """
    n = scores.shape[0]
    if k is None:
        k = scores.shape[1]
    if n <= k:
        raise ValueError(f"need more rows ({n}) than parameters ({k})")
    clusters = [np.asarray(c) for c in clusters]
    if not clusters:
        meat = scores.T @ scores
        v = bread @ meat @ bread * (n / (n - k))
        return Vcov(v, "robust")
    if len(clusters) > 2:
        raise ValueError("at most two cluster factors")
    sizes = []
    for c in clusters:
        if c.shape[0] != n:
            raise ClusterError("cluster vector not aligned with rows")
        g = int(np.unique(c).size)
        if g < 2:
            raise ClusterError("cluster factor has a single cluster; no variation to estimate")
        sizes.append(g)
    if len(clusters) == 1:
        meat = cluster_meat(scores, clusters[0])
        kind = "cluster"
    else:
        meat = (cluster_meat(scores, clusters[0]) + cluster_meat(scores, clusters[1])
                - cluster_meat(scores, intersect(clusters[0], clusters[1])))
        kind = "two-way"
    g = min(sizes)
    v = bread @ meat @ bread * (g / (g - 1) * (n - 1) / (n - k))
    v = (v + v.T) / 2
    truncated = False
    if kind == "two-way":
        negative = v[target, target] < 0 if target is not None else np.linalg.eigvalsh(v).min() < 0
        if negative:
            v = psd_truncate(v)
            truncated = True
    return Vcov(v, kind, tuple(sizes), truncated)
