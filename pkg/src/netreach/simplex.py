"""Dense phase-one simplex for finitely generated cone membership.

Decides whether ``target = G c`` has a solution ``c >= 0``.  When it does
not, the optimal phase-one duals give a Farkas certificate ``phi`` with
``phi @ G >= 0`` and ``phi @ target < 0``.  Pivoting follows Bland's rule,
so the routine terminates on degenerate instances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LPResult", "cone_feasibility", "verify_farkas"]


@dataclass
class LPResult:
    feasible: bool
    weights: np.ndarray | None
    phi: np.ndarray | None
    objective: float
    iterations: int


def cone_feasibility(G, target, tol=1e-9, pivot_tol=1e-12, max_iter=10_000):
    """Phase-one simplex on ``G c + a = target``, minimising ``sum(a)``.

    Parameters
    ----------
    G : array_like, shape (m, K)
        Generators as columns.
    target : array_like, shape (m,)
    tol : float
        Phase-one objective at or below ``tol`` counts as feasible.

    Returns
    -------
    LPResult
        ``weights`` (length K) when feasible, otherwise a unit-norm ``phi``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    t = np.asarray(target, dtype=float)
    m, K = G.shape
    sign = np.where(t < 0, -1.0, 1.0)
    tab = np.zeros((m, K + m + 1))
    tab[:, :K] = sign[:, None] * G
    tab[:, K : K + m] = np.eye(m)
    tab[:, -1] = sign * t
    basis = list(range(K, K + m))
    cost = np.concatenate([np.zeros(K), np.ones(m)])

    it = 0
    while it < max_iter:
        cb = cost[basis]
        reduced = cost - cb @ tab[:, :-1]
        entering = next((j for j in range(K + m) if reduced[j] < -pivot_tol), None)
        if entering is None:
            break
        col = tab[:, entering]
        rows = [r for r in range(m) if col[r] > pivot_tol]
        if not rows:
            break  # unbounded direction; cannot occur for a phase-one objective
        ratios = np.array([tab[r, -1] / col[r] for r in rows])
        best = ratios.min()
        ties = [r for r, q in zip(rows, ratios) if q <= best + pivot_tol]
        leave = min(ties, key=lambda r: basis[r])
        tab[leave] /= tab[leave, entering]
        for r in range(m):
            if r != leave and tab[r, entering] != 0.0:
                tab[r] -= tab[r, entering] * tab[leave]
        basis[leave] = entering
        it += 1

    cb = cost[basis]
    objective = float(cb @ tab[:, -1])
    if objective <= tol:
        w = np.zeros(K)
        for r, j in enumerate(basis):
            if j < K:
                w[j] = max(tab[r, -1], 0.0)
        return LPResult(True, w, None, objective, it)
    y = cb @ tab[:, K : K + m]
    phi = -(sign * y)
    phi /= np.linalg.norm(phi)
    return LPResult(False, None, phi, objective, it)


def verify_farkas(G, target, phi, tol=1e-9):
    """Check ``phi @ g >= -tol`` for every generator and ``phi @ target < -tol``."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    phi = np.asarray(phi, dtype=float)
    phi = phi / np.linalg.norm(phi)
    return bool(np.all(phi @ G >= -tol) and phi @ np.asarray(target, dtype=float) < -tol)
