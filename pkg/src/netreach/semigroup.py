"""Evolution and Dirichlet operators of the two concrete transport systems.

Static vertex conditions (state ``f`` on ``[0,1]`` with values in ``C^m``)::

    x_t = x_s,   x(t,1) = B x(t,0) + u(t) b

with semigroup ``(T(t)f)(s) = B^k f(t+s-k)`` for ``t+s`` in ``[k, k+1)``.

Dynamic vertex conditions (state ``(f, d)`` in ``L^p x C^n``): the vertex
vector ``d`` integrates the outflow, ``d' = PhiPlusW x(t,0)``, and the edges
are fed through ``x(t,1) = Psi (d(t) + u(t) v)``.  For ``0 <= t <= 1``::

    [T(t)(f,d)]_1(s) = f(t+s)                     if t+s < 1
                     = B V_{t+s-1} f + Psi d       otherwise
    [T(t)(f,d)]_2    = PhiPlusW V_t f + d

where ``V_r f`` is the integral of ``f`` over ``[0, r]``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .funcspace import (
    BREAK_TOL,
    EXP_DEGREE,
    EXP_TOL,
    ExtendedState,
    PiecewisePoly,
    concat,
    exp_tensor,
    merge_breaks,
    sup_distance,
    taylor_shift,
)
from .network import GraphMatrices

__all__ = [
    "SingularResolventError",
    "StaticSystem",
    "DynamicSystem",
    "resolvent_apply",
    "default_lambda",
    "growth_bound_surrogate",
    "static_apply_T",
    "static_dirichlet",
    "dynamic_apply_T",
    "dynamic_T1",
    "dynamic_apply_T_long",
    "dynamic_dirichlet",
    "volterra_delta",
    "dynamic_power_formula",
    "inject",
    "admissibility_identity_check",
    "exponential_identity_check",
    "compatibility_defect",
]

SPECTRUM_GAP = 1e-10
RCOND_MIN = 1e-12


class SingularResolventError(ValueError):
    pass


@dataclass(frozen=True)
class StaticSystem:
    """Transport on ``m`` edges with static boundary matrix ``B`` and control direction ``b``."""

    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.array(self.B))
        b = np.atleast_1d(np.array(self.b))
        if B.shape != (b.size, b.size):
            raise ValueError(f"B has shape {B.shape} but b has length {b.size}")
        B.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_network(cls, mats: GraphMatrices, vertex: int):
        """Control entering at ``vertex`` (0-based): ``b = Psi e_vertex``."""
        if not 0 <= vertex < mats.n:
            raise ValueError(f"vertex index {vertex} outside 0..{mats.n - 1}")
        return cls(mats.B, mats.Psi[:, vertex])

    @property
    def m(self):
        return self.b.size


@dataclass(frozen=True)
class DynamicSystem:
    """Network flow with dynamic vertex conditions, controlled at one vertex (0-based)."""

    mats: GraphMatrices
    vertex: int

    def __post_init__(self):
        if self.mats.mode != "dynamic":
            raise ValueError("DynamicSystem needs matrices built in dynamic mode")
        if not 0 <= self.vertex < self.mats.n:
            raise ValueError(f"vertex index {self.vertex} outside 0..{self.mats.n - 1}")

    @property
    def n(self):
        return self.mats.n

    @property
    def m(self):
        return self.mats.m

    @property
    def A(self):
        return self.mats.A

    @property
    def B(self):
        return self.mats.B

    @property
    def Psi(self):
        return self.mats.Psi

    @property
    def v(self):
        e = np.zeros(self.n)
        e[self.vertex] = 1.0
        return e

    @property
    def b(self):
        return self.mats.Psi[:, self.vertex].copy()


def _check_unit(f, dim):
    a, b = f.domain
    if abs(a) > BREAK_TOL or abs(b - 1.0) > BREAK_TOL:
        raise ValueError(f"state must live on [0, 1], got {f.domain}")
    if f.dim != dim:
        raise ValueError(f"state has dimension {f.dim}, system needs {dim}")


def _snap_unit(f):
    br = np.array(f.breaks)
    br[0], br[-1] = 0.0, 1.0
    return PiecewisePoly(br, f.coeffs)


def resolvent_apply(mu, M, rhs):
    """``(mu - M)^{-1} rhs`` by LU, refusing near-singular shifts."""
    M = np.asarray(M)
    eig = np.linalg.eigvals(M)
    if eig.size and np.min(np.abs(mu - eig)) <= SPECTRUM_GAP * max(1.0, abs(mu)):
        raise SingularResolventError(f"{mu!r} lies within {SPECTRUM_GAP} of the spectrum")
    shifted = mu * np.eye(M.shape[0]) - M
    rcond = 1.0 / np.linalg.cond(shifted, 1)
    if rcond < RCOND_MIN:
        raise SingularResolventError(f"resolvent at {mu!r} is numerically singular (rcond={rcond:.3g})")
    return scipy.linalg.lu_solve(scipy.linalg.lu_factor(shifted), rhs)


def growth_bound_surrogate(B):
    """``log rho(B)``, used in place of the growth bound of the semigroup."""
    rho = float(np.max(np.abs(np.linalg.eigvals(B))))
    return math.log(rho) if rho > 0 else -math.inf


def default_lambda(B):
    rho = float(np.max(np.abs(np.linalg.eigvals(B))))
    return math.log(rho + 1.0) + 1.0


# ----------------------------------------------------------------------
# static boundary conditions


def static_apply_T(sys: StaticSystem, f: PiecewisePoly, t: float) -> PiecewisePoly:
    """``(T(t)f)(s) = B^k f(t+s-k)`` with ``k = floor(t+s)``, exactly."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    B = sys.B
    _check_unit(f, B.shape[0])
    if t == 0:
        return f
    k0 = math.floor(t)
    cands = np.concatenate([f.breaks + k0 - t, f.breaks + k0 + 1 - t])
    cands = cands[(cands > 0.0) & (cands < 1.0)]
    grid = merge_breaks(np.concatenate([[0.0, 1.0], cands]))
    lefts = grid[:-1]
    mids = 0.5 * (grid[:-1] + grid[1:])
    k = np.floor(t + mids).astype(int)
    src = np.clip(np.searchsorted(f.breaks, t + mids - k, side="right") - 1, 0, f.ncells - 1)
    delta = (t + lefts - k) - f.breaks[src]
    c = taylor_shift(f.coeffs[src], delta)
    powers = {kk: np.linalg.matrix_power(B, kk) for kk in (k0, k0 + 1)}
    out = np.empty(c.shape[:2] + (B.shape[0],), dtype=np.result_type(c, B))
    for i, kk in enumerate(k):
        out[i] = c[i] @ powers[kk].T
    return PiecewisePoly(grid, out)


def static_dirichlet(sys: StaticSystem, lam, d=None, degree=EXP_DEGREE, tol=EXP_TOL):
    """``Q_lam d = e^{lam s} R(e^lam, B) d``; ``d`` defaults to the control direction."""
    d = sys.b if d is None else np.atleast_1d(np.asarray(d))
    w = resolvent_apply(np.exp(lam), sys.B, d)
    return exp_tensor(lam, w, degree=degree, tol=tol)


# ----------------------------------------------------------------------
# dynamic boundary conditions


def _const(vec, lo, hi):
    return PiecewisePoly.constant(vec, (lo, hi))


def dynamic_T1(sys: DynamicSystem, x: ExtendedState) -> ExtendedState:
    """``T(1)(f, d) = (B V_s f + Psi d, PhiPlusW V_1 f + d)``."""
    _check_unit(x.f, sys.m)
    F = x.f.integral()
    first = F.apply(sys.B) + _const(sys.Psi @ x.d, 0.0, 1.0)
    second = sys.mats.PhiPlusW @ F(1.0) + x.d
    return ExtendedState(first, second)


def dynamic_apply_T(sys: DynamicSystem, x: ExtendedState, t: float) -> ExtendedState:
    if not 0.0 <= t <= 1.0 + BREAK_TOL:
        raise ValueError("dynamic_apply_T needs 0 <= t <= 1; use dynamic_apply_T_long")
    _check_unit(x.f, sys.m)
    if t <= BREAK_TOL:
        return x
    if t >= 1.0 - BREAK_TOL:
        return dynamic_T1(sys, x)
    F = x.f.integral()
    lower = x.f.restrict(t, 1.0).shift(-t)
    upper = F.restrict(0.0, t).shift(1.0 - t).apply(sys.B)
    upper = upper + _const(sys.Psi @ x.d, *upper.domain)
    first = _snap_unit(concat([lower, upper]))
    second = sys.mats.PhiPlusW @ F(t) + x.d
    return ExtendedState(first, second)


def dynamic_apply_T_long(sys: DynamicSystem, x: ExtendedState, t: float) -> ExtendedState:
    """``T(t) = T(tau) T(1)^k`` with ``t = k + tau``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    k = math.floor(t)
    tau = t - k
    if tau > 1.0 - BREAK_TOL:
        k, tau = k + 1, 0.0
    for _ in range(k):
        x = dynamic_T1(sys, x)
    return dynamic_apply_T(sys, x, tau)


def dynamic_dirichlet(sys: DynamicSystem, lam, d=None, degree=EXP_DEGREE, tol=EXP_TOL):
    """``Q_lam d = (lam e^{lam s} Psi R(lam e^lam, A) d, A R(lam e^lam, A) d)``."""
    if lam == 0:
        raise ValueError("the dynamic Dirichlet operator needs lam != 0")
    d = sys.v if d is None else np.atleast_1d(np.asarray(d))
    r = resolvent_apply(lam * np.exp(lam), sys.A, d)
    first = exp_tensor(lam, lam * (sys.Psi @ r), degree=degree, tol=tol)
    return ExtendedState(first, sys.A @ r)


def volterra_delta(B, f: PiecewisePoly) -> PiecewisePoly:
    """``(B V_s + delta_1) f = B V_s f + f(1)``."""
    return f.integral().apply(B) + PiecewisePoly.constant(f(1.0), f.domain)


def dynamic_power_formula(sys: DynamicSystem, g: PiecewisePoly, k: int) -> PiecewisePoly:
    """``(B V_s + delta_1)^{k-1} B Psi V_s g`` for a vertex-valued ``g``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    h = g.integral().apply(sys.B @ sys.Psi)
    for _ in range(k - 1):
        h = volterra_delta(sys.B, h)
    return h


def inject(sys, u: PiecewisePoly):
    """The operator ``M``: a scalar function on ``[0,1]`` mapped into the state space."""
    if isinstance(sys, DynamicSystem):
        return ExtendedState(u.tensor(sys.b), np.zeros(sys.n))
    return u.tensor(sys.b)


def compatibility_defect(sys: DynamicSystem, x: ExtendedState, warn=True):
    """Size of ``PhiMinus f(1) - d`` plus the distance of ``f(1)`` from ``rg Psi``."""
    f1 = x.f.left_limit(1.0)
    proj = sys.Psi @ (sys.mats.PhiMinus @ f1)
    defect = float(np.linalg.norm(sys.mats.PhiMinus @ f1 - x.d) + np.linalg.norm(f1 - proj))
    if warn and defect > 1e-9:
        warnings.warn(
            f"initial state violates the vertex compatibility condition (defect {defect:.3g})",
            stacklevel=2,
        )
    return defect


# ----------------------------------------------------------------------
# admissibility identities


def _windowed(profile: PiecewisePoly, alpha, beta):
    """``profile`` on ``[alpha, beta)``, zero elsewhere on ``[0, 1]``."""
    if beta - alpha <= BREAK_TOL:
        return PiecewisePoly.zeros(profile.dim)
    parts = []
    if alpha > BREAK_TOL:
        parts.append(PiecewisePoly.zeros(profile.dim, (0.0, alpha)))
    parts.append(profile.restrict(alpha, beta))
    if beta < 1.0 - BREAK_TOL:
        parts.append(PiecewisePoly.zeros(profile.dim, (beta, 1.0)))
    return concat(parts)


def admissibility_identity_check(sys, lam, alpha, beta, v=1.0, degree=EXP_DEGREE, tol=EXP_TOL):
    """Sup-norm residual of the windowed admissibility identity at ``t = 1``::

        (e^{lam beta} T(1-beta) - e^{lam alpha} T(1-alpha)) B_lam v
            == M(e^{lam s} 1_[alpha, beta] v)
    """
    if not 0.0 <= alpha <= beta <= 1.0:
        raise ValueError("need 0 <= alpha <= beta <= 1")
    if isinstance(sys, DynamicSystem):
        Bl = dynamic_dirichlet(sys, lam, v * sys.v, degree, tol)
        lhs = np.exp(lam * beta) * dynamic_apply_T(sys, Bl, 1.0 - beta) - np.exp(
            lam * alpha
        ) * dynamic_apply_T(sys, Bl, 1.0 - alpha)
        prof = exp_tensor(lam, v * sys.b, degree, tol)
        rhs = ExtendedState(_windowed(prof, alpha, beta), np.zeros(sys.n))
    else:
        Bl = static_dirichlet(sys, lam, v * sys.b, degree, tol)
        lhs = np.exp(lam * beta) * static_apply_T(sys, Bl, 1.0 - beta) - np.exp(
            lam * alpha
        ) * static_apply_T(sys, Bl, 1.0 - alpha)
        rhs = _windowed(exp_tensor(lam, v * sys.b, degree, tol), alpha, beta)
    return sup_distance(lhs, rhs)


def exponential_identity_check(sys, lam, v=1.0, degree=EXP_DEGREE, tol=EXP_TOL):
    """Sup-norm residual of ``(e^lam - T(1)) B_lam v == M(e^{lam s} v)``."""
    if isinstance(sys, DynamicSystem):
        Bl = dynamic_dirichlet(sys, lam, v * sys.v, degree, tol)
        lhs = np.exp(lam) * Bl - dynamic_T1(sys, Bl)
        rhs = ExtendedState(exp_tensor(lam, v * sys.b, degree, tol), np.zeros(sys.n))
    else:
        Bl = static_dirichlet(sys, lam, v * sys.b, degree, tol)
        lhs = np.exp(lam) * Bl - static_apply_T(sys, Bl, 1.0)
        rhs = exp_tensor(lam, v * sys.b, degree, tol)
    return sup_distance(lhs, rhs)
