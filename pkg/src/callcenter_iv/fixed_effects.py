"""Within-transformation for one or two high-dimensional factors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

TOL = 1e-8
MAX_ITER = 10_000


class AbsorptionError(RuntimeError):
    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass
class Absorbed:
    data: np.ndarray
    iterations: int
    delta: float
    dof: int
    saturated: list[int] = field(default_factory=list)


def demean(data: np.ndarray, groups: np.ndarray, counts: np.ndarray | None = None) -> np.ndarray:
    """Subtract group means column by column (exact, one pass)."""
    groups = np.asarray(groups)
    if counts is None:
        counts = np.bincount(groups)
    out = np.empty_like(data, dtype=float)
    safe = np.where(counts > 0, counts, 1)
    if data.ndim == 1:
        return data - (np.bincount(groups, weights=data, minlength=len(counts)) / safe)[groups]
    for j in range(data.shape[1]):
        col = data[:, j]
        out[:, j] = col - (np.bincount(groups, weights=col, minlength=len(counts)) / safe)[groups]
    return out


def absorbed_dof(factors: list[np.ndarray]) -> int:
    """Rank of the stacked dummy blocks (levels minus redundancies)."""
    if not factors:
        return 0
    if len(factors) == 1:
        return int(np.unique(factors[0]).size)
    if len(factors) > 2:
        raise ValueError("at most two absorbed factors are supported")
    a = np.unique(factors[0], return_inverse=True)[1]
    b = np.unique(factors[1], return_inverse=True)[1]
    na, nb = a.max() + 1, b.max() + 1
    graph = sparse.coo_matrix((np.ones(a.size), (a, na + b)), shape=(na + nb, na + nb))
    n_comp = connected_components(graph, directed=False)[0]
    return int(na + nb - n_comp)


def absorb(data: np.ndarray, factors: list[np.ndarray], tol: float = TOL,
           max_iter: int = MAX_ITER) -> Absorbed:
    """Project ``data`` off the dummy space of ``factors``.

    A single factor is demeaned exactly. Two factors use alternating
    projections until the largest absolute change in a sweep is below
    ``tol``; hitting ``max_iter`` raises :class:`AbsorptionError`.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    encoded = [np.unique(f, return_inverse=True)[1] for f in factors]
    saturated = [i for i, f in enumerate(encoded) if f.size and f.max() + 1 == f.size]
    dof = absorbed_dof(encoded)
    if not encoded:
        return Absorbed(data.copy(), 0, 0.0, 0, saturated)
    if len(encoded) == 1:
        return Absorbed(demean(data, encoded[0]), 1, 0.0, dof, saturated)
    if len(encoded) > 2:
        raise ValueError("at most two absorbed factors are supported")

    counts = [np.bincount(f) for f in encoded]
    x = data.copy()
    trace: list[float] = []
    for it in range(1, max_iter + 1):
        prev = x
        x = demean(x, encoded[0], counts[0])
        x = demean(x, encoded[1], counts[1])
        delta = float(np.max(np.abs(x - prev))) if x.size else 0.0
        trace.append(delta)
        if delta < tol:
            return Absorbed(x, it, delta, dof, saturated)
    raise AbsorptionError(
        f"alternating projections did not converge in {max_iter} iterations "
        f"(last change {trace[-1]:.3g})", trace)
