"""Random test instances: networks, matrix pairs and piecewise polynomials.

Everything takes a ``numpy.random.Generator`` so runs are reproducible from
a single seed.
"""
from __future__ import annotations

from math import comb

import numpy as np

from .funcspace import PiecewisePoly
from .network import NetworkSpec

__all__ = [
    "random_network",
    "random_pair",
    "random_integer_pair",
    "random_nonnegative_pair",
    "random_dyadic_poly",
    "random_poly",
    "random_control",
]


def random_network(rng, n_max=8, m_max=16, free_w_in=False):
    """Random network in which every vertex has at least one outgoing edge."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(n, max(n, m_max) + 1))
    tails = np.concatenate([np.arange(n), rng.integers(0, n, m - n)])
    rng.shuffle(tails)
    heads = rng.integers(0, n, m)
    w_out = np.empty(m)
    for j in range(n):
        idx = np.nonzero(tails == j)[0]
        w = rng.uniform(0.1, 1.0, idx.size)
        w_out[idx] = w / w.sum()
    w_in = rng.uniform(0.0, 1.0, m) if free_w_in else None
    edges = list(zip(tails.tolist(), heads.tolist()))
    return NetworkSpec(n=n, edges=edges, w_out=w_out.tolist(), w_in=None if w_in is None else w_in.tolist())


def random_pair(rng, m):
    return rng.standard_normal((m, m)), rng.standard_normal(m)


def random_integer_pair(rng, m, lo=-2, hi=2, sparsity=0.5):
    """Small-integer ``(B, b)``; sparsity makes rank deficiency common."""
    B = rng.integers(lo, hi + 1, (m, m)) * (rng.random((m, m)) > sparsity)
    b = rng.integers(lo, hi + 1, m) * (rng.random(m) > sparsity / 2)
    return B.astype(float), b.astype(float)


def random_nonnegative_pair(rng, m, density=0.5):
    """Nonnegative ``(B, b)``, mixing 0/1 patterns and random weights."""
    mask = rng.random((m, m)) < density
    if rng.random() < 0.5:
        B = mask.astype(float)
    else:
        B = mask * rng.uniform(0.1, 1.0, (m, m))
    b = (rng.random(m) < 0.5) * rng.uniform(0.5, 1.5, m)
    if not b.any():
        b[rng.integers(m)] = 1.0
    return B, b


def random_dyadic_poly(rng, dim, degree=3, denom=8, max_cells=4, domain=(0.0, 1.0)):
    """Piecewise polynomial with breakpoints on the grid ``k/denom`` and
    coefficients in ``Z/denom``; arithmetic on such data is exact."""
    a, b = domain
    grid = np.arange(int(round(a * denom)) + 1, int(round(b * denom))) / denom
    ncut = min(int(rng.integers(0, max_cells)), grid.size)
    cuts = np.sort(rng.choice(grid, ncut, replace=False)) if ncut else np.array([])
    breaks = np.concatenate([[a], cuts, [b]])
    coeffs = rng.integers(-8, 9, (breaks.size - 1, degree + 1, dim)) / denom
    return PiecewisePoly(breaks, coeffs)


def random_poly(rng, dim, degree=3, max_cells=4, domain=(0.0, 1.0)):
    a, b = domain
    ncut = int(rng.integers(0, max_cells))
    cuts = np.sort(rng.uniform(a, b, ncut))
    breaks = np.unique(np.concatenate([[a], cuts, [b]]))
    coeffs = rng.standard_normal((breaks.size - 1, degree + 1, dim))
    return PiecewisePoly(breaks, coeffs)


def random_control(rng, T, degree=2, nonnegative=False, denom=4):
    """Scalar control on ``[0, T]`` with breakpoints on the grid ``k/denom``."""
    grid = np.arange(1, T * denom) / denom
    ncut = int(rng.integers(0, min(3 * T, grid.size) + 1)) if grid.size else 0
    cuts = np.sort(rng.choice(grid, ncut, replace=False)) if ncut else np.array([])
    breaks = np.concatenate([[0.0], cuts, [float(T)]])
    if nonnegative:
        # Bernstein form with nonnegative weights stays nonnegative on each cell
        cells = []
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            w = rng.uniform(0.0, 1.0, degree + 1)
            cells.append(_bernstein_to_monomial(w, hi - lo))
        coeffs = np.array(cells)[:, :, None]
    else:
        coeffs = rng.standard_normal((breaks.size - 1, degree + 1, 1))
    return PiecewisePoly(breaks, coeffs)


def _bernstein_to_monomial(w, h):
    d = w.size - 1
    out = np.zeros(d + 1)
    # sum_j w_j C(d,j) x^j (1-x)^(d-j) with x = s/h
    for j in range(d + 1):
        for i in range(d - j + 1):
            out[j + i] += w[j] * comb(d, j) * comb(d - j, i) * (-1) ** i / h ** (j + i)
    return out
