"""Controllability maps, control synthesis and closed-loop verification.

A control ``u`` on ``[0, n]`` is cut into unit segments
``u_k(s) = u(n - k - 1 + s)``, so ``u_0`` is the segment applied last.  For
the static system the final state is ``sum_k u_k(s) B^k b``.
"""
from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .funcspace import BREAK_TOL, ExtendedState, PiecewisePoly, concat, lp_norm, merge_breaks
from .reach import RANK_RTOL
from .semigroup import DynamicSystem, StaticSystem, dynamic_T1, inject, static_apply_T, volterra_delta

__all__ = [
    "ConsistencyError",
    "NegativeTargetError",
    "ControlSignal",
    "SynthesisResult",
    "ClosedLoopReport",
    "segment",
    "assemble",
    "controllability_map_static",
    "semigroup_map_static",
    "dynamic_map_terms",
    "controllability_map_dynamic",
    "semigroup_map_dynamic",
    "forward",
    "synthesize",
    "synthesize_positive",
    "simulate_characteristics",
    "verify_closed_loop",
    "export_control_csv",
]

SYNTH_TOL = 1e-8
CROSSCHECK_TOL = 1e-8


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same map disagree."""


class NegativeTargetError(ValueError):
    pass


@dataclass(frozen=True)
class ControlSignal:
    """Scalar control on ``[0, T]``."""

    u: PiecewisePoly

    def __post_init__(self):
        if self.u.dim != 1:
            raise ValueError("a control signal is scalar-valued")
        if abs(self.u.domain[0]) > BREAK_TOL:
            raise ValueError("a control signal starts at time 0")

    @property
    def T(self):
        return float(self.u.domain[1])

    def __call__(self, r):
        return self.u(r)[..., 0]


@dataclass
class SynthesisResult:
    control: ControlSignal
    predicted_final: object
    residual_to_target: float
    mode: str
    target: object = None
    coefficients: PiecewisePoly | None = None
    tol: float = SYNTH_TOL

    @property
    def reached(self):
        return self.residual_to_target <= self.tol


def _as_signal(u):
    return u if isinstance(u, ControlSignal) else ControlSignal(u)


def segment(u, n=None):
    """Unit segments ``u_k(s) = u(n - k - 1 + s)``, ``k = 0..n-1``.

    Examples
    --------
    >>> u = ControlSignal(PiecewisePoly([0.0, 2.0], [[[0.0], [1.0]]]))
    >>> [seg(0.5)[0] for seg in segment(u)]
    [1.5, 0.5]
    """
    u = _as_signal(u)
    T = u.T
    if abs(T - round(T)) > BREAK_TOL or round(T) < 1:
        raise ValueError(f"horizon {T!r} is not a positive integer")
    if n is not None and int(n) != round(T):
        raise ValueError(f"horizon {T!r} does not match n={n}")
    n = int(round(T))
    poly = PiecewisePoly(np.r_[0.0, u.u.breaks[1:-1], float(n)], u.u.coeffs)
    cuts = merge_breaks(np.r_[poly.breaks, np.arange(1, n)])
    poly = poly._resample(cuts)
    segs = []
    for k in range(n):
        lo = n - k - 1
        piece = poly.restrict(lo, lo + 1).shift(-lo)
        br = np.array(piece.breaks)
        br[0], br[-1] = 0.0, 1.0
        segs.append(PiecewisePoly(br, piece.coeffs))
    return segs


def assemble(segments):
    """Inverse of :func:`segment`: ``u`` on ``[j, j+1]`` is ``segments[n-1-j]``."""
    n = len(segments)
    if n == 0:
        raise ValueError("need at least one segment")
    parts = [segments[n - 1 - j].shift(j) for j in range(n)]
    return ControlSignal(concat(parts))


# ----------------------------------------------------------------------
# static boundary conditions


def controllability_map_static(sys: StaticSystem, u) -> PiecewisePoly:
    """Final state ``sum_k u_k(s) B^k b`` of the system driven from rest."""
    segs = segment(u)
    out = None
    x = np.asarray(sys.b)
    for seg in segs:
        term = seg.tensor(x)
        out = term if out is None else out + term
        x = sys.B @ x
    return out


def semigroup_map_static(sys: StaticSystem, u) -> PiecewisePoly:
    """Same map, computed as ``x <- T(1) x + M u|[j, j+1]`` per unit step."""
    segs = segment(u)
    x = PiecewisePoly.zeros(sys.m)
    for seg in reversed(segs):
        x = static_apply_T(sys, x, 1.0) + inject(sys, seg)
    return x


# ----------------------------------------------------------------------
# dynamic boundary conditions


def dynamic_map_terms(sys: DynamicSystem, u):
    """Summands of the edge component of the final state.

    Term 0 is ``u_0 (x) Psi v``; term ``k >= 1`` is
    ``(B V_s + delta_1)^{k-1} V_s (u_k (x) B Psi v)``.
    """
    segs = segment(u)
    b = sys.b
    Bb = sys.B @ b
    terms = [segs[0].tensor(b)]
    for k in range(1, len(segs)):
        h = segs[k].integral().tensor(Bb)
        for _ in range(k - 1):
            h = volterra_delta(sys.B, h)
        terms.append(h)
    return terms


def semigroup_map_dynamic(sys: DynamicSystem, u) -> ExtendedState:
    segs = segment(u)
    x = ExtendedState.zero(sys.m, sys.n)
    for seg in reversed(segs):
        x = dynamic_T1(sys, x) + inject(sys, seg)
    return x


def controllability_map_dynamic(sys: DynamicSystem, u, crosscheck_tol=CROSSCHECK_TOL) -> ExtendedState:
    """Final state of the dynamic system driven from rest.

    The edge component is summed term by term (see :func:`dynamic_map_terms`);
    the vertex component comes from stepping the semigroup, which also serves
    as a cross-check of the edge component.
    """
    terms = dynamic_map_terms(sys, u)
    first = terms[0]
    for t in terms[1:]:
        first = first + t
    full = semigroup_map_dynamic(sys, u)
    gap = lp_norm(first - full.f, np.inf)
    scale = max(1.0, lp_norm(full.f, np.inf))
    if gap > crosscheck_tol * scale:
        raise ConsistencyError(f"term-wise and semigroup evaluations differ by {gap:.3g}")
    return ExtendedState(first, full.d)


def forward(sys, u) -> SynthesisResult:
    """Wrap a given control and its predicted final state for verification."""
    u = _as_signal(u)
    if isinstance(sys, DynamicSystem):
        pred = controllability_map_dynamic(sys, u)
    else:
        pred = controllability_map_static(sys, u)
    return SynthesisResult(u, pred, 0.0, "forward", target=pred)


# ----------------------------------------------------------------------
# synthesis


def _krylov_matrix(sys, n):
    cols = []
    x = np.asarray(sys.b, dtype=float)
    for _ in range(n):
        cols.append(x)
        x = sys.B @ x
    return np.column_stack(cols)


def _check_target(sys, target):
    if target.dim != sys.m:
        raise ValueError(f"target has dimension {target.dim}, system has {sys.m} edges")
    a, b = target.domain
    if abs(a) > BREAK_TOL or abs(b - 1.0) > BREAK_TOL:
        raise ValueError("target must live on [0, 1]")


def synthesize(sys: StaticSystem, target: PiecewisePoly, n: int, tol=SYNTH_TOL) -> SynthesisResult:
    """Minimum-norm least-squares control on ``[0, n]`` steering 0 to ``target``.

    Pointwise, ``target(s) ~ K c(s)`` with ``K = [b, Bb, ..., B^{n-1} b]`` is
    solved by the pseudo-inverse of ``K``, which is exact on polynomials.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    _check_target(sys, target)
    K = _krylov_matrix(sys, n)
    Kp = np.linalg.pinv(K, rcond=RANK_RTOL)
    coeffs = target.apply(Kp)
    control = assemble([coeffs.component(k) for k in range(n)])
    pred = controllability_map_static(sys, control)
    resid = lp_norm(pred - target, 2)
    mode = "exact" if resid <= tol else "least-squares"
    return SynthesisResult(control, pred, resid, mode, target=target, coefficients=coeffs, tol=tol)


def _independent_columns(K):
    """Indices of nonzero columns of ``K``, dropping positive multiples of earlier ones."""
    keep = []
    for j in range(K.shape[1]):
        c = K[:, j]
        nc = np.linalg.norm(c)
        if nc == 0:
            continue
        if any(np.linalg.norm(c / nc - K[:, i] / np.linalg.norm(K[:, i])) < 1e-12 for i in keep):
            continue
        keep.append(j)
    return keep


def _nnls_rows(Ka, vals):
    return np.array([scipy.optimize.nnls(Ka, v)[0] for v in vals])


def _fit_cell(Ka, target, lo, hi, deg, depth, max_depth):
    """Nonnegative coefficient polynomials on ``[lo, hi]``; list of (lo, hi, coeffs)."""
    q = deg + 3
    P = np.polynomial.polynomial
    k = np.arange(q)
    nodes = lo + (hi - lo) * 0.5 * (1.0 - np.cos((2 * k + 1) * np.pi / (2 * q)))
    C = _nnls_rows(Ka, target(nodes))
    # interpolate through all q nodes, degree q - 1, centred at lo
    V = np.vander(nodes - lo, q, increasing=True)
    coeffs = np.linalg.solve(V, C)
    checks = 0.5 * (nodes[:-1] + nodes[1:])
    C_chk = _nnls_rows(Ka, target(checks))
    interp = np.stack([P.polyval(checks - lo, coeffs[:, j]) for j in range(coeffs.shape[1])], axis=1)
    scale = max(1.0, float(np.max(np.abs(C))))
    cell = PiecewisePoly([lo, hi], coeffs[None])
    ok = np.max(np.abs(interp - C_chk), initial=0.0) <= 1e-9 * scale and np.min(
        cell.component_min(), initial=0.0
    ) >= -1e-12 * scale
    if ok:
        # clip round-off below zero by lifting the constant term
        lift = np.minimum(cell.component_min(), 0.0)
        coeffs[0] -= lift
        return [(lo, hi, coeffs)]
    if depth >= max_depth:
        # piecewise-linear interpolation of NNLS samples is nonnegative by construction
        xs = np.linspace(lo, hi, q)
        Cs = _nnls_rows(Ka, target(xs))
        out = []
        for i in range(q - 1):
            slope = (Cs[i + 1] - Cs[i]) / (xs[i + 1] - xs[i])
            out.append((xs[i], xs[i + 1], np.vstack([Cs[i], slope])))
        return out
    mid = 0.5 * (lo + hi)
    return _fit_cell(Ka, target, lo, mid, deg, depth + 1, max_depth) + _fit_cell(
        Ka, target, mid, hi, deg, depth + 1, max_depth
    )


def synthesize_positive(sys: StaticSystem, target: PiecewisePoly, n: int, tol=SYNTH_TOL, max_depth=8):
    """Nonnegative control on ``[0, n]`` steering 0 as close as possible to ``target``.

    Each target cell is fitted by nonnegative least squares at Chebyshev
    nodes; the coefficient samples are interpolated and the interpolant's
    sign is re-checked exactly.  Cells failing the check are halved, and at
    ``max_depth`` a piecewise-linear interpolant is used.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    _check_target(sys, target)
    if np.any(np.asarray(sys.B) < 0) or np.any(np.asarray(sys.b) < 0):
        raise ValueError("positive synthesis needs B and b entrywise nonnegative")
    if np.iscomplexobj(target.coeffs) or np.min(target.component_min()) < -tol:
        raise NegativeTargetError("positive synthesis needs a nonnegative target")
    K = _krylov_matrix(sys, n)
    active = _independent_columns(K)
    deg = target.effective_degree()
    cells = []
    if active:
        Ka = K[:, active]
        for lo, hi in zip(target.breaks[:-1], target.breaks[1:]):
            cells.extend(_fit_cell(Ka, target, lo, hi, deg, 0, max_depth))
        top = max(c.shape[0] for _, _, c in cells)
        breaks = [cells[0][0]] + [hi for _, hi, _ in cells]
        full = np.zeros((len(cells), top, n))
        for i, (_, _, c) in enumerate(cells):
            full[i, : c.shape[0], active] = c.T
        breaks[0], breaks[-1] = 0.0, 1.0
        coeffs = PiecewisePoly(breaks, full).trim()
    else:
        coeffs = PiecewisePoly.zeros(n)
    control = assemble([coeffs.component(k) for k in range(n)])
    if np.min(control.u.component_min()) < 0:
        raise ConsistencyError("positive synthesis produced a negative control")
    pred = controllability_map_static(sys, control)
    resid = lp_norm(pred - target, 2)
    return SynthesisResult(control, pred, resid, "nonnegative", target=target, coefficients=coeffs, tol=tol)


# ----------------------------------------------------------------------
# closed-loop verification


@dataclass
class CharacteristicsRun:
    """Final state sampled at Gauss nodes of ``cells`` uniform cells."""

    s: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    d: np.ndarray | None
    cells: int
    nodes: int
    aligned: bool


@dataclass
class ClosedLoopReport:
    simulated_vs_predicted: float
    simulated_vs_target: float
    vertex_vs_predicted: float | None
    min_state: float
    cells: int
    nodes: int
    aligned: bool
    tol: float

    @property
    def passed(self):
        ok = self.simulated_vs_predicted <= self.tol
        if self.vertex_vs_predicted is not None:
            ok = ok and self.vertex_vs_predicted <= self.tol
        return ok


def _aligned_cell_count(points, minimum=8, maximum=512):
    frac = np.asarray(points, dtype=float) % 1.0
    for N in range(minimum, maximum + 1):
        if np.all(np.abs(frac * N - np.round(frac * N)) <= 1e-9 * N):
            return N, True
    return maximum, False


def _integration_matrix(x, w):
    """``W[i, j]`` integrates the Lagrange basis at Gauss nodes ``x`` over ``[-1, x_i]``."""
    L = np.polynomial.legendre
    q = x.size
    V = np.stack([L.legval(x, np.eye(q)[k]) for k in range(q)], axis=1)
    Iint = np.stack([L.legval(x, L.legint(np.eye(q)[k], lbnd=-1)) for k in range(q)], axis=1)
    to_leg = ((2 * np.arange(q) + 1) / 2.0)[:, None] * V.T * w[None, :]
    return Iint @ to_leg


def simulate_characteristics(sys, control, cells=None, nodes=None, extra_breaks=()) -> CharacteristicsRun:
    """Transport the state along characteristics, injecting at the boundary.

    The state on each of ``cells`` uniform cells is held at Gauss nodes.  One
    step of length ``h = 1/cells`` drops the cell at ``s = 0`` and appends a
    new one at ``s = 1`` whose values come from the boundary condition at
    times ``t + sigma``:

    * static: ``B x(t+sigma, 0) + u(t+sigma) b``
    * dynamic: ``Psi (d(t+sigma) + u(t+sigma) v)`` with ``d`` integrated from
      the outflow ``PhiPlusW x(t+sigma, 0)``.
    """
    control = _as_signal(control)
    T = control.T
    dynamic = isinstance(sys, DynamicSystem)
    pts = np.r_[control.u.breaks, np.asarray(extra_breaks, dtype=float)]
    if cells is None:
        cells, aligned = _aligned_cell_count(pts)
    else:
        aligned = _aligned_cell_count(pts, cells, cells)[1]
    if nodes is None:
        nodes = control.u.degree + 2 + (int(math.ceil(T)) if dynamic else 0)
        nodes = min(max(nodes, 2), 48)
    h = 1.0 / cells
    x, w = np.polynomial.legendre.leggauss(nodes)
    sig = 0.5 * h * (x + 1.0)
    wts = 0.5 * h * w
    m = sys.m
    buf = deque(np.zeros((nodes, m)) for _ in range(cells))
    nsteps = int(round(T * cells))
    if dynamic:
        W = 0.5 * h * _integration_matrix(x, w)
        Psi, PhiW, v = np.asarray(sys.Psi), np.asarray(sys.mats.PhiPlusW), sys.v
        d = np.zeros(sys.n)
    else:
        B, b = np.asarray(sys.B), np.asarray(sys.b)
        d = None
    for step in range(nsteps):
        t = step * h
        uu = control(t + sig)
        cell0 = buf.popleft()
        if dynamic:
            d_nodes = d[None, :] + (W @ cell0) @ PhiW.T
            new = (d_nodes + uu[:, None] * v[None, :]) @ Psi.T
            d = d + (wts @ cell0) @ PhiW.T
        else:
            new = cell0 @ B.T + uu[:, None] * b[None, :]
        buf.append(new)
    s = (np.arange(cells)[:, None] * h + sig[None, :]).ravel()
    values = np.concatenate(list(buf), axis=0)
    weights = np.tile(wts, cells)
    return CharacteristicsRun(s, weights, values, d, cells, nodes, aligned)


def _l2_at_nodes(run, f):
    if f is None:
        return math.nan
    diff = run.values - f(run.s)
    return float(np.sqrt(np.sum(run.weights * np.sum(np.abs(diff) ** 2, axis=1))))


def verify_closed_loop(sys, result: SynthesisResult, tol=1e-8, cells=None, nodes=None) -> ClosedLoopReport:
    """Compare an independent characteristics simulation with the prediction."""
    pred = result.predicted_final
    target = result.target
    pf = pred.f if isinstance(pred, ExtendedState) else pred
    tf = target.f if isinstance(target, ExtendedState) else target
    extra = [pf.breaks] + ([tf.breaks] if tf is not None else [])
    if nodes is None:
        deg = max(result.control.u.degree, pf.degree, tf.degree if tf is not None else 0)
        nodes = min(deg + 2, 48)
    run = simulate_characteristics(sys, result.control, cells=cells, nodes=nodes, extra_breaks=np.concatenate(extra))
    vertex = None
    if isinstance(pred, ExtendedState):
        vertex = float(np.linalg.norm(run.d - pred.d))
    return ClosedLoopReport(
        simulated_vs_predicted=_l2_at_nodes(run, pf),
        simulated_vs_target=_l2_at_nodes(run, tf),
        vertex_vs_predicted=vertex,
        min_state=float(np.min(run.values)) if run.values.size else 0.0,
        cells=run.cells,
        nodes=run.nodes,
        aligned=run.aligned,
        tol=tol,
    )


def export_control_csv(control, samples=101):
    """Sampled control as CSV text with columns ``r,u``."""
    control = _as_signal(control)
    r = np.linspace(0.0, control.T, int(samples))
    buf = io.StringIO()
    buf.write("r,u\n")
    for ri, ui in zip(r, control(r)):
        buf.write(f"{float(ri)!r},{float(ui)!r}\n")
    return buf.getvalue()
