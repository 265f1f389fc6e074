"""Least-squares helpers shared by the residualization and the estimators."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg


class RankError(ValueError):
    def __init__(self, columns: Sequence[str]):
        super().__init__("rank-deficient design; collinear columns: " + ", ".join(columns))
        self.columns = list(columns)


def solve_ls(X: np.ndarray, y: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Least squares through pivoted QR; rank deficiency names the culprits."""
    n, k = X.shape
    if k == 0:
        return np.zeros(0)
    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = 1e-10 * max(diag[0], 1.0) * max(n, k)
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise RankError([names[j] for j in sorted(piv[rank:])])
    coef = np.empty(k)
    coef[piv] = scipy.linalg.solve_triangular(r, q.T @ y)
    return coef
