"""Reachability spaces and verdicts.

The exact reachability space of the static system is ``L^p[0,1] (x) K`` where
``K = span{b, Bb, B^2 b, ...}``; the positive one is generated by the cone
``co{B^k b}``.  Rank decisions use the relative threshold
``RANK_RTOL * sigma_max(B)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .funcspace import PiecewisePoly, lp_norm
from .network import GraphMatrices
from .semigroup import (
    DynamicSystem,
    SingularResolventError,
    StaticSystem,
    resolvent_apply,
    static_apply_T,
    static_dirichlet,
)
from .simplex import cone_feasibility, verify_farkas

__all__ = [
    "RANK_RTOL",
    "MEMBERSHIP_TOL",
    "ReachReport",
    "NetworkReachReport",
    "MembershipResult",
    "AxisCertificate",
    "ConeReport",
    "PositivityReport",
    "DynamicReachStructure",
    "krylov_reach",
    "minimal_polynomial_degree",
    "network_reach",
    "membership_exact",
    "cone_reach",
    "support_orbit_axes",
    "positivity_preservation_check",
    "dynamic_reach_structure",
]

RANK_RTOL = 1e-10
MEMBERSHIP_TOL = 1e-8
CONE_TOL = 1e-9
BOUNDARY_TOL = 1e-6
ANGLE_TOL = 1e-9


def _sigma_max(B):
    B = np.atleast_2d(B)
    return float(np.linalg.norm(B, 2)) if B.size else 0.0


def _orthonormal_krylov(apply, v0, max_dim, scale):
    """Gram-Schmidt (twice) over ``v0, apply(v0), ...`` until the new direction
    falls below ``RANK_RTOL * scale`` relative to the unit previous vector."""
    v0 = np.asarray(v0)
    nrm = float(np.linalg.norm(v0))
    if nrm == 0.0 or max_dim == 0:
        return np.zeros((v0.size, 0), dtype=v0.dtype), []
    Q = [v0 / nrm]
    heights = []
    thresh = RANK_RTOL * scale
    while len(Q) < max_dim:
        w = apply(Q[-1])
        M = np.column_stack(Q)
        for _ in range(2):
            w = w - M @ (M.conj().T @ w)
        h = float(np.linalg.norm(w))
        heights.append(h)
        if h <= thresh:
            break
        Q.append(w / h)
    return np.column_stack(Q), heights


@dataclass
class ReachReport:
    """Krylov span of ``(B, b)``.

    ``basis`` is orthonormal with ``l`` columns; ``horizon`` is the time after
    which the reachable space no longer grows.
    """

    basis: np.ndarray
    l: int
    minpoly_degree: int
    exact_controllable: bool
    horizon: int
    m: int
    heights: list = field(default_factory=list)

    def gram_residual(self):
        Q = self.basis
        return float(np.max(np.abs(Q.conj().T @ Q - np.eye(Q.shape[1])), initial=0.0))


def minimal_polynomial_degree(B):
    """Degree of the minimal polynomial: ``dim span{I, B, B^2, ...}``."""
    B = np.atleast_2d(np.asarray(B))
    m = B.shape[0]
    if m == 0:
        return 0
    vecI = np.eye(m, dtype=B.dtype).ravel()
    basis, _ = _orthonormal_krylov(
        lambda x: (B @ x.reshape(m, m)).ravel(), vecI, m, _sigma_max(B)
    )
    return basis.shape[1]


def krylov_reach(B, b) -> ReachReport:
    """Orthonormal basis of ``span{b, Bb, ...}`` and the Kalman verdict.

    Examples
    --------
    >>> rep = krylov_reach([[0, 1], [1, 0]], [1, 0])
    >>> rep.l, rep.exact_controllable
    (2, True)
    """
    B = np.atleast_2d(np.asarray(B))
    b = np.atleast_1d(np.asarray(b))
    m = b.size
    if B.shape != (m, m):
        raise ValueError(f"B has shape {B.shape} but b has length {m}")
    basis, heights = _orthonormal_krylov(lambda x: B @ x, b, m, _sigma_max(B))
    l = basis.shape[1]
    deg = minimal_polynomial_degree(B)
    return ReachReport(
        basis=basis,
        l=l,
        minpoly_degree=max(deg, l),
        exact_controllable=l == m,
        horizon=max(deg, l),
        m=m,
        heights=heights,
    )


# ----------------------------------------------------------------------
# network forms


@dataclass
class NetworkReachReport:
    """Edge form ``span{b, Bb, ...}`` and vertex form ``Psi span{v, Av, ...}``."""

    edge: ReachReport
    vertex: ReachReport
    angle_residual: float
    horizon: int
    vertex_index: int

    @property
    def l(self):
        return self.edge.l

    @property
    def exact_controllable(self):
        return self.edge.exact_controllable

    @property
    def consistent(self):
        return self.angle_residual <= 1e-10


def network_reach(mats: GraphMatrices, vertex: int) -> NetworkReachReport:
    """Reachability from a (0-based) vertex, in both edge and vertex form."""
    if not 0 <= vertex < mats.n:
        raise ValueError(f"vertex index {vertex} outside 0..{mats.n - 1}")
    v = np.zeros(mats.n)
    v[vertex] = 1.0
    edge = krylov_reach(mats.B, mats.Psi @ v)
    vert = krylov_reach(mats.A, v)
    mapped = mats.Psi @ vert.basis
    if edge.l == 0 and mapped.shape[1] == 0:
        resid = 0.0
    elif np.linalg.matrix_rank(mapped) != edge.l:
        resid = 1.0
    else:
        angles = scipy.linalg.subspace_angles(edge.basis, mapped)
        resid = float(np.sin(np.max(angles)))
    return NetworkReachReport(
        edge=edge,
        vertex=vert,
        angle_residual=resid,
        horizon=min(mats.m, mats.n),
        vertex_index=vertex,
    )


# ----------------------------------------------------------------------
# membership


@dataclass
class MembershipResult:
    member: bool
    residual: float
    coefficients: PiecewisePoly
    projection: PiecewisePoly
    p: object = 2


def membership_exact(f: PiecewisePoly, rep, p=2, tol=MEMBERSHIP_TOL) -> MembershipResult:
    """Is ``f`` a function with values in the span of ``rep.basis``?

    Coefficients are taken against the orthonormal basis, so
    ``projection = coefficients @ basis.T`` pointwise.
    """
    Q = rep.basis if hasattr(rep, "basis") else np.asarray(rep)
    if f.dim != Q.shape[0]:
        raise ValueError(f"function has dimension {f.dim}, basis lives in C^{Q.shape[0]}")
    if Q.shape[1] == 0:
        coeffs = PiecewisePoly(f.breaks, np.zeros(f.coeffs.shape[:2] + (0,)))
        proj = f * 0.0
    else:
        coeffs = f.apply(Q.conj().T)
        proj = coeffs.apply(Q)
    residual = lp_norm(f - proj, p)
    return MembershipResult(residual <= tol, residual, coeffs, proj, p)


# ----------------------------------------------------------------------
# positive cone


@dataclass
class AxisCertificate:
    """LP outcome for one axis ``e_i``.

    ``weights`` multiply the raw generators ``B^k b``; ``phi`` is a unit
    separating functional when the axis is outside the cone.
    """

    axis: int
    feasible: bool
    weights: np.ndarray | None
    phi: np.ndarray | None
    objective: float
    verified: bool
    perturbed: "AxisCertificate | None" = None


@dataclass
class ConeReport:
    generators: np.ndarray
    K: int
    extra_ray: np.ndarray | None
    positive_controllable: bool
    closure_controllable: bool
    orbit_controllable: bool
    orbit_axes: tuple
    closure_sensitive: bool
    truncation_sensitive: bool
    certificates: list

    @property
    def flagged(self):
        return self.closure_sensitive or self.truncation_sensitive


def _check_nonneg(name, arr):
    if np.iscomplexobj(arr) or np.any(np.asarray(arr) < 0):
        raise ValueError(f"{name} must be real and entrywise nonnegative")


def support_orbit_axes(B, b, max_steps=None):
    """Axes hit exactly by some ``B^k b`` (nonnegative data, any ``k``).

    With nonnegative generators, ``e_i`` lies in ``co{B^k b}`` iff some
    ``B^k b`` is a positive multiple of ``e_i``, since ``e_i`` spans an
    extreme ray of the orthant.  The support of ``B^k b`` only depends on
    the support of ``B^{k-1} b``, so the orbit of supports is eventually
    periodic and can be followed combinatorially.
    """
    B = np.asarray(B)
    pattern = B > 0
    supp = frozenset(np.nonzero(np.asarray(b) > 0)[0].tolist())
    seen = set()
    hits = set()
    steps = 0
    while supp and supp not in seen:
        seen.add(supp)
        if len(supp) == 1:
            hits.update(supp)
        idx = sorted(supp)
        supp = frozenset(np.nonzero(pattern[:, idx].any(axis=1))[0].tolist())
        steps += 1
        if max_steps is not None and steps >= max_steps:
            break
    return tuple(sorted(hits))


def _limit_direction(B, gens):
    """Normalized limit of the directions of ``B^k b``, when it visibly exists."""
    dirs = [g / np.linalg.norm(g) for g in gens if np.linalg.norm(g) > 0]
    if len(dirs) >= 2 and np.linalg.norm(dirs[-1] - dirs[-2]) < ANGLE_TOL:
        return dirs[-1]
    if not dirs:
        return None
    eig, right = np.linalg.eig(B)
    rho = float(np.max(np.abs(eig)))
    if rho == 0.0:
        return None
    top = np.nonzero(np.abs(np.abs(eig) - rho) <= 1e-9 * rho)[0]
    if top.size != 1 or abs(eig[top[0]].imag) > 1e-12 or eig[top[0]].real <= 0:
        return None
    wl, left = np.linalg.eig(B.T)
    j = int(np.argmin(np.abs(wl - eig[top[0]])))
    y = np.real(left[:, j])
    x = np.real(right[:, top[0]])
    if abs(y @ dirs[0]) <= 1e-12 * np.linalg.norm(y):
        return None
    x = x * np.sign(x[np.argmax(np.abs(x))])
    if np.any(x < -1e-12):
        return None
    x = np.clip(x, 0.0, None)
    return x / np.linalg.norm(x)


def _axis_lp(G, axis, tol):
    m = G.shape[0]
    e = np.zeros(m)
    e[axis] = 1.0
    res = cone_feasibility(G, e, tol=tol)
    if res.feasible:
        return AxisCertificate(axis, True, res.weights, None, res.objective, True)
    ok = verify_farkas(G, e, res.phi, tol=tol)
    cert = AxisCertificate(axis, False, None, res.phi, res.objective, ok)
    if not ok:
        # degenerate certificate: nudge the target into the open orthant and retry
        pert = e + 10 * tol * np.ones(m)
        res2 = cone_feasibility(G, pert, tol=tol)
        ok2 = res2.phi is not None and verify_farkas(G, pert, res2.phi, tol=tol)
        cert.perturbed = AxisCertificate(
            axis, res2.feasible, res2.weights, res2.phi, res2.objective, res2.feasible or ok2
        )
    return cert


def cone_reach(B, b, K=None, tol=CONE_TOL) -> ConeReport:
    """Positive controllability: is ``co{B^k b : k >= 0}`` the whole orthant?

    The cone is truncated after ``K`` generators (default ``2m``).  Three
    verdicts are produced and compared:

    * the LP verdict on the ``K`` generators (``positive_controllable``),
    * the LP verdict with the limit ray of ``B^k b`` added
      (``closure_controllable``),
    * the exact combinatorial verdict from :func:`support_orbit_axes`
      (``orbit_controllable``).

    Disagreements set ``closure_sensitive`` or ``truncation_sensitive``.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    _check_nonneg("B", B)
    _check_nonneg("b", b)
    m = b.size
    if B.shape != (m, m):
        raise ValueError(f"B has shape {B.shape} but b has length {m}")
    K = 2 * m if K is None else int(K)
    if K < 1:
        raise ValueError("K must be positive")

    gens = []
    x = b.copy()
    for _ in range(K):
        gens.append(x)
        x = B @ x
    gens = np.array(gens)
    norms = np.linalg.norm(gens, axis=1)
    live = norms > 0
    G = (gens[live] / norms[live, None]).T if live.any() else np.zeros((m, 0))

    ray = _limit_direction(B, gens) if live.any() else None

    certs = []
    closure_ok = []
    boundary = False
    for i in range(m):
        if G.shape[1] == 0:
            e = np.zeros(m)
            e[i] = 1.0
            phi = -e
            certs.append(AxisCertificate(i, False, None, phi, 1.0, True))
            closure_ok.append(False)
            continue
        cert = _axis_lp(G, i, tol)
        if cert.feasible:
            w = np.zeros(K)
            w[live] = cert.weights / norms[live]
            cert.weights = w
        elif cert.objective <= BOUNDARY_TOL:
            boundary = True
        certs.append(cert)
        if ray is None:
            closure_ok.append(cert.feasible)
        else:
            closure_ok.append(cone_feasibility(np.column_stack([G, ray]), np.eye(m)[i], tol=tol).feasible)

    positive = all(c.feasible for c in certs)
    closure = all(closure_ok)
    axes = support_orbit_axes(B, b)
    orbit = len(axes) == m
    return ConeReport(
        generators=gens,
        K=K,
        extra_ray=ray,
        positive_controllable=positive,
        closure_controllable=closure,
        orbit_controllable=orbit,
        orbit_axes=axes,
        closure_sensitive=(closure != positive) or boundary,
        truncation_sensitive=orbit != positive,
        certificates=certs,
    )


# ----------------------------------------------------------------------
# positivity of the Dirichlet profiles


@dataclass
class PositivityReport:
    lam_grid: list
    resolvent_min: float
    profile_min: float
    first_negative_term: int | None
    skipped: list
    notices: list

    def passed(self, tol=1e-12):
        return self.resolvent_min >= -tol and self.profile_min >= -tol


def positivity_preservation_check(B, b, lam_grid=None, s_grid=(0.25, 0.5, 0.75), tol=1e-12):
    """Check ``R(e^lam, B) b >= 0`` and ``(e^{lam s} - T(s)) B_lam >= 0``.

    ``B_lam`` is the Dirichlet profile ``s -> e^{lam s} R(e^lam, B) b``.  The
    Neumann series ``sum_k e^{-lam(k+1)} B^k b`` is scanned for its first
    negative term, which pinpoints the source of a violation.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m = b.size
    rho = float(np.max(np.abs(np.linalg.eigvals(B))))
    if lam_grid is None:
        lam0 = math.log(rho + 1.0)
        lam_grid = [lam0 + 0.1, lam0 + 1.0, lam0 + 10.0]
    sys = StaticSystem(B, b)
    res_min = math.inf
    prof_min = math.inf
    skipped, notices = [], []
    for lam in lam_grid:
        if rho > 0 and lam <= math.log(rho):
            notices.append(f"lambda={lam!r} is not above log rho(B)={math.log(rho)!r}")
        try:
            r = resolvent_apply(math.exp(lam), B, b)
        except SingularResolventError as exc:
            skipped.append(lam)
            notices.append(f"lambda={lam!r} skipped: {exc}")
            continue
        res_min = min(res_min, float(np.min(r)))
        prof = static_dirichlet(sys, lam)
        for s in s_grid:
            diff = math.exp(lam * s) * prof - static_apply_T(sys, prof, s)
            prof_min = min(prof_min, float(np.min(diff.component_min())))
    first_neg = None
    x = b.copy()
    for k in range(2 * m):
        if np.min(x) < -tol:
            first_neg = k
            break
        x = B @ x
    return PositivityReport(
        lam_grid=list(lam_grid),
        resolvent_min=res_min,
        profile_min=prof_min,
        first_negative_term=first_neg,
        skipped=skipped,
        notices=notices,
    )


# ----------------------------------------------------------------------
# dynamic vertex conditions


@dataclass
class DynamicReachStructure:
    """Directions ``B^k Psi v`` with the Sobolev grade ``k`` of their coefficient."""

    directions: np.ndarray
    grades: tuple
    report: ReachReport
    horizon: int

    @property
    def basis(self):
        return self.report.basis

    @property
    def l(self):
        return self.report.l


def dynamic_reach_structure(sys: DynamicSystem) -> DynamicReachStructure:
    rep = krylov_reach(sys.B, sys.b)
    dirs = []
    x = np.asarray(sys.b, dtype=float)
    for _ in range(rep.l):
        dirs.append(x)
        x = sys.B @ x
    return DynamicReachStructure(
        directions=np.array(dirs).reshape(rep.l, sys.m),
        grades=tuple(range(rep.l)),
        report=rep,
        horizon=min(sys.m, sys.n),
    )
