"""Vector-valued piecewise polynomials on a bounded interval.

A :class:`PiecewisePoly` stores one polynomial per cell, in the monomial
basis centred at the cell's left endpoint.  Evaluation is right-continuous
at interior breakpoints; the last cell is closed on the right.

All transport formulas in this package (shifts, prefix integrals, point
evaluations, matrix actions) map this class into itself, so every state and
every control is carried exactly up to floating point.  Exponential profiles
enter through :func:`exp_tensor`, a piecewise Taylor expansion with an
a-priori error bound.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

__all__ = [
    "DEGREE_CAP",
    "BREAK_TOL",
    "EXP_DEGREE",
    "EXP_TOL",
    "DegreeCapError",
    "DomainError",
    "PiecewisePoly",
    "ExtendedState",
    "state_to_text",
    "state_from_text",
    "taylor_shift",
    "merge_breaks",
    "prefix_integral",
    "eval_at_one",
    "exp_tensor",
    "exp_error_bound",
    "matrix_apply",
    "concat",
    "refine_to_common_breakpoints",
    "lp_norm",
    "sup_distance",
]

DEGREE_CAP = 32
BREAK_TOL = 1e-12
EXP_DEGREE = 16
EXP_TOL = 1e-13


class DegreeCapError(ValueError):
    pass


class DomainError(ValueError):
    pass


def taylor_shift(coeffs, delta):
    """Re-centre monomial coefficients from ``x`` to ``x + delta``.

    ``coeffs`` has shape ``(..., D+1, dim)``; ``delta`` broadcasts against the
    leading axes.  Uses repeated synthetic division, which is exact whenever
    the data are short dyadic rationals.
    """
    delta = np.asarray(delta)
    c = np.array(coeffs, dtype=np.result_type(coeffs, delta, float), copy=True)
    if not np.any(delta):
        return c
    deg = c.shape[-2] - 1
    d = delta[..., None]
    for i in range(deg):
        for k in range(deg - 1, i - 1, -1):
            c[..., k, :] += d * c[..., k + 1, :]
    return c


def merge_breaks(points, tol=BREAK_TOL):
    """Sorted unique breakpoints; points closer than ``tol`` are merged.

    The first and last points are always kept, so the domain never moves.
    """
    pts = np.sort(np.asarray(points, dtype=float).ravel())
    lo, hi = pts[0], pts[-1]
    kept = [lo]
    for p in pts[1:-1]:
        if p - kept[-1] > tol and hi - p > tol:
            kept.append(p)
    kept.append(hi)
    return np.array(kept)


def _polyval_cells(c, x):
    """Horner evaluation of per-cell coefficients ``c`` (k, D+1, dim) at ``x`` (k,)."""
    out = c[:, -1, :].copy()
    for j in range(c.shape[1] - 2, -1, -1):
        out = out * x[:, None] + c[:, j, :]
    return out


class PiecewisePoly:
    """Piecewise polynomial ``[a, b] -> C^dim``.

    Parameters
    ----------
    breaks : array_like, shape (N+1,)
        Strictly increasing breakpoints ``a = x_0 < ... < x_N = b``.
    coeffs : array_like, shape (N, D+1, dim)
        ``coeffs[i, k]`` multiplies ``(s - x_i)**k`` on cell ``i``.
    """

    __slots__ = ("breaks", "coeffs")
    __array_ufunc__ = None

    def __init__(self, breaks, coeffs):
        breaks = np.array(breaks, dtype=float)
        coeffs = np.array(coeffs)
        if coeffs.dtype.kind not in "fc":
            coeffs = coeffs.astype(float)
        if breaks.ndim != 1 or breaks.size < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if coeffs.ndim != 3 or coeffs.shape[0] != breaks.size - 1:
            raise ValueError(
                f"coeffs must have shape (ncells, degree+1, dim); got {coeffs.shape} "
                f"for {breaks.size - 1} cells"
            )
        if coeffs.shape[1] - 1 > DEGREE_CAP:
            raise DegreeCapError(
                f"degree {coeffs.shape[1] - 1} exceeds the cap {DEGREE_CAP}; "
                "raise netreach.funcspace.DEGREE_CAP if this is intended"
            )
        breaks.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("PiecewisePoly is immutable")

    # ------------------------------------------------------------------
    # constructors
    @classmethod
    def constant(cls, value, domain=(0.0, 1.0)):
        value = np.atleast_1d(np.asarray(value))
        return cls(list(domain), value.reshape(1, 1, -1))

    @classmethod
    def zeros(cls, dim, domain=(0.0, 1.0)):
        return cls(list(domain), np.zeros((1, 1, dim)))

    @classmethod
    def from_coefficients(cls, coeffs, domain=(0.0, 1.0)):
        """Single polynomial ``sum_k coeffs[k] (s - a)**k`` on ``domain``."""
        c = np.asarray(coeffs)
        if c.ndim == 1:
            c = c[:, None]
        return cls(list(domain), c[None])

    @classmethod
    def indicator(cls, alpha, beta, value=1.0, domain=(0.0, 1.0)):
        """``value`` on ``[alpha, beta)``, zero elsewhere."""
        a, b = domain
        value = np.atleast_1d(np.asarray(value))
        pts = merge_breaks([a, alpha, beta, b])
        mids = 0.5 * (pts[:-1] + pts[1:])
        inside = (mids >= alpha) & (mids < beta)
        coeffs = np.zeros((pts.size - 1, 1, value.size), dtype=np.result_type(value, float))
        coeffs[inside, 0, :] = value
        return cls(pts, coeffs)

    @classmethod
    def stack(cls, parts):
        """Stack scalar-or-vector functions on a common domain into one."""
        parts = list(parts)
        grid = merge_breaks(np.concatenate([p.breaks for p in parts]))
        deg = max(p.degree for p in parts)
        cols = [p._resample(grid)._pad(deg).coeffs for p in parts]
        return cls(grid, np.concatenate(cols, axis=2))

    # ------------------------------------------------------------------
    # basic attributes
    @property
    def domain(self):
        return float(self.breaks[0]), float(self.breaks[-1])

    @property
    def ncells(self):
        return self.coeffs.shape[0]

    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    @property
    def dim(self):
        return self.coeffs.shape[2]

    @property
    def dtype(self):
        return self.coeffs.dtype

    def effective_degree(self, tol=0.0):
        """Largest power with a coefficient above ``tol`` in some cell (-1 for zero)."""
        mags = np.abs(self.coeffs).max(axis=(0, 2))
        nz = np.nonzero(mags > tol)[0]
        return int(nz[-1]) if nz.size else -1

    def cell_degrees(self, tol=0.0):
        mags = np.abs(self.coeffs).max(axis=2)
        out = np.full(self.ncells, -1)
        for i, row in enumerate(mags):
            nz = np.nonzero(row > tol)[0]
            if nz.size:
                out[i] = nz[-1]
        return out

    def __repr__(self):
        return (
            f"PiecewisePoly(domain={self.domain}, ncells={self.ncells}, "
            f"degree={self.degree}, dim={self.dim})"
        )

    # ------------------------------------------------------------------
    # evaluation
    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        scalar = s_arr.ndim == 0
        s_arr = np.atleast_1d(s_arr)
        a, b = self.domain
        if np.any((s_arr < a - BREAK_TOL) | (s_arr > b + BREAK_TOL)):
            raise DomainError(f"evaluation point outside [{a}, {b}]")
        idx = np.clip(np.searchsorted(self.breaks, s_arr, side="right") - 1, 0, self.ncells - 1)
        out = _polyval_cells(self.coeffs[idx], s_arr - self.breaks[idx])
        return out[0] if scalar else out

    def left_limit(self, s):
        """Value approached from the left (uses the cell ending at ``s``)."""
        a, b = self.domain
        if not (a < s <= b + BREAK_TOL):
            raise DomainError(f"left limit needs s in ({a}, {b}]")
        i = int(np.clip(np.searchsorted(self.breaks, s, side="left") - 1, 0, self.ncells - 1))
        return _polyval_cells(self.coeffs[i : i + 1], np.array([s - self.breaks[i]]))[0]

    # ------------------------------------------------------------------
    # structural operations
    def _pad(self, degree):
        if degree == self.degree:
            return self
        if degree < self.degree:
            raise ValueError("cannot pad to a lower degree")
        c = np.zeros((self.ncells, degree + 1, self.dim), dtype=self.dtype)
        c[:, : self.degree + 1] = self.coeffs
        return PiecewisePoly(self.breaks, c)

    def trim(self):
        """Drop trailing powers that vanish identically."""
        eff = max(self.effective_degree(), 0)
        return PiecewisePoly(self.breaks, self.coeffs[:, : eff + 1])

    def _resample(self, grid):
        """Re-express on ``grid`` (which must cover the same domain)."""
        grid = np.asarray(grid, dtype=float)
        if grid.size == self.breaks.size and np.array_equal(grid, self.breaks):
            return self
        mids = 0.5 * (grid[:-1] + grid[1:])
        src = np.clip(np.searchsorted(self.breaks, mids, side="right") - 1, 0, self.ncells - 1)
        delta = grid[:-1] - self.breaks[src]
        return PiecewisePoly(grid, taylor_shift(self.coeffs[src], delta))

    def refine(self, points):
        """Insert extra breakpoints (merged at :data:`BREAK_TOL`)."""
        a, b = self.domain
        pts = np.asarray(points, dtype=float).ravel()
        pts = pts[(pts > a) & (pts < b)]
        return self._resample(merge_breaks(np.concatenate([self.breaks, pts])))

    def restrict(self, lo, hi):
        a, b = self.domain
        if lo < a - BREAK_TOL or hi > b + BREAK_TOL or hi - lo <= BREAK_TOL:
            raise DomainError(f"[{lo}, {hi}] is not a subinterval of [{a}, {b}]")
        inner = self.breaks[(self.breaks > lo + BREAK_TOL) & (self.breaks < hi - BREAK_TOL)]
        return self._resample(np.concatenate([[lo], inner, [hi]]))

    def shift(self, h):
        """Translate the domain: ``g(s) = f(s - h)`` on ``[a+h, b+h]``."""
        return PiecewisePoly(self.breaks + h, self.coeffs)

    def apply(self, M):
        """Pointwise action of a matrix ``M`` of shape (r, dim)."""
        M = np.atleast_2d(np.asarray(M))
        if M.shape[1] != self.dim:
            raise ValueError(f"matrix with {M.shape[1]} columns applied to dim {self.dim}")
        return PiecewisePoly(self.breaks, self.coeffs @ M.T)

    def tensor(self, w):
        """``f (x) w`` for a scalar-valued ``f``: ``s -> f(s) w``."""
        if self.dim != 1:
            raise ValueError("tensor needs a scalar-valued function")
        w = np.atleast_1d(np.asarray(w))
        return PiecewisePoly(self.breaks, self.coeffs * w[None, None, :])

    def component(self, i):
        return PiecewisePoly(self.breaks, self.coeffs[:, :, i : i + 1])

    def integral(self):
        """Prefix integral ``s -> int_a^s f``; same cells, degree + 1."""
        n, d1, dim = self.coeffs.shape
        if d1 > DEGREE_CAP:
            raise DegreeCapError(
                f"prefix integral would reach degree {d1} > cap {DEGREE_CAP}; "
                "raise netreach.funcspace.DEGREE_CAP"
            )
        c = np.zeros((n, d1 + 1, dim), dtype=self.dtype)
        c[:, 1:] = self.coeffs / np.arange(1, d1 + 1)[None, :, None]
        widths = np.diff(self.breaks)
        cell_int = _polyval_cells(c, widths)
        c[1:, 0] = np.cumsum(cell_int[:-1], axis=0)
        return PiecewisePoly(self.breaks, c)

    def derivative(self):
        if self.degree == 0:
            return PiecewisePoly(self.breaks, np.zeros_like(self.coeffs))
        k = np.arange(1, self.degree + 1)
        return PiecewisePoly(self.breaks, self.coeffs[:, 1:] * k[None, :, None])

    def total_integral(self):
        return self.integral()(self.domain[1])

    # ------------------------------------------------------------------
    # arithmetic
    def _binary(self, other, op):
        if not isinstance(other, PiecewisePoly):
            return NotImplemented
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch {self.dim} vs {other.dim}")
        (a0, b0), (a1, b1) = self.domain, other.domain
        if abs(a0 - a1) > BREAK_TOL or abs(b0 - b1) > BREAK_TOL:
            raise DomainError(f"domains differ: {self.domain} vs {other.domain}")
        f, g = refine_to_common_breakpoints(self, other)
        deg = max(f.degree, g.degree)
        f, g = f._pad(deg), g._pad(deg)
        return PiecewisePoly(f.breaks, op(f.coeffs, g.coeffs))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return PiecewisePoly(self.breaks, -self.coeffs)

    def __mul__(self, c):
        if isinstance(c, PiecewisePoly):
            return NotImplemented
        return PiecewisePoly(self.breaks, self.coeffs * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return PiecewisePoly(self.breaks, self.coeffs / c)

    # ------------------------------------------------------------------
    # norms and extrema
    def norm(self, p=2):
        return lp_norm(self, p)

    def component_min(self):
        """Exact minimum of each (real) component over the domain."""
        if np.iscomplexobj(self.coeffs):
            raise TypeError("component_min needs real coefficients")
        out = np.full(self.dim, np.inf)
        widths = np.diff(self.breaks)
        for i in range(self.ncells):
            h = widths[i]
            for j in range(self.dim):
                c = self.coeffs[i, :, j]
                xs = [0.0, h]
                xs.extend(_real_roots_in(np.polynomial.polynomial.polyder(c), 0.0, h))
                vals = np.polynomial.polynomial.polyval(np.array(xs), c)
                out[j] = min(out[j], vals.min())
        return out

    # ------------------------------------------------------------------
    # text serialization
    def to_text(self, hex_floats=False):
        if np.iscomplexobj(self.coeffs):
            raise TypeError("text serialization supports real coefficients only")
        fmt = float.hex if hex_floats else repr
        lines = [
            "# piecewise polynomial; coef: <cell> <power> <values per component>",
            f"dim: {self.dim}",
            f"degree: {self.degree}",
            "breakpoints: " + " ".join(fmt(float(x)) for x in self.breaks),
        ]
        for i in range(self.ncells):
            for k in range(self.degree + 1):
                vals = " ".join(fmt(float(v)) for v in self.coeffs[i, k])
                lines.append(f"coef: {i} {k} {vals}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        poly, extra = _parse_poly(text)
        if extra:
            raise ValueError(f"unexpected keys in function document: {sorted(extra)}")
        return poly


def _parse_float(tok):
    try:
        return float(tok)
    except ValueError:
        return float.fromhex(tok)


def _parse_poly(text):
    """Parse a function document; returns the poly and any unrecognised keys."""
    dim = degree = None
    breaks = None
    rows = []
    extra = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key: value', got {raw!r}")
        key, toks = key.strip(), rest.split()
        try:
            if key == "dim":
                dim = int(toks[0])
            elif key == "degree":
                degree = int(toks[0])
            elif key == "breakpoints":
                breaks = [_parse_float(t) for t in toks]
            elif key == "coef":
                rows.append((int(toks[0]), int(toks[1]), [_parse_float(t) for t in toks[2:]]))
            else:
                extra[key] = toks
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}: {exc}") from None
    if dim is None or degree is None or breaks is None:
        raise ValueError("function document needs 'dim', 'degree' and 'breakpoints'")
    coeffs = np.zeros((len(breaks) - 1, degree + 1, dim))
    for cell, power, vals in rows:
        if len(vals) != dim:
            raise ValueError(f"coef row for cell {cell} power {power} has {len(vals)} values, need {dim}")
        coeffs[cell, power] = vals
    return PiecewisePoly(breaks, coeffs), extra


def _real_roots_in(c, lo, hi):
    c = np.trim_zeros(np.asarray(c), "b")
    if c.size <= 1:
        return []
    r = np.polynomial.polynomial.polyroots(c)
    r = r[np.abs(r.imag) <= 1e-9 * (1 + np.abs(r.real))].real
    return [float(x) for x in r if lo < x < hi]


# ----------------------------------------------------------------------
# module-level operations


def prefix_integral(f):
    """``V_s f = int_0^s f(r) dr`` as a function of ``s``."""
    return f.integral()


def eval_at_one(f):
    """Point evaluation at ``s = 1``."""
    return f(1.0)


def matrix_apply(M, f):
    return f.apply(M)


def concat(parts):
    """Join functions on adjacent intervals into one function."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to concatenate")
    dim = parts[0].dim
    deg = max(p.degree for p in parts)
    breaks = [parts[0].breaks]
    for prev, nxt in zip(parts, parts[1:]):
        if nxt.dim != dim:
            raise ValueError("dimension mismatch in concat")
        if abs(prev.domain[1] - nxt.domain[0]) > BREAK_TOL:
            raise DomainError(f"gap between {prev.domain} and {nxt.domain}")
        breaks.append(nxt.breaks[1:])
    coeffs = np.concatenate([p._pad(deg).coeffs for p in parts], axis=0)
    return PiecewisePoly(np.concatenate(breaks), coeffs)


def refine_to_common_breakpoints(f, g):
    grid = merge_breaks(np.concatenate([f.breaks, g.breaks]))
    return f._resample(grid), g._resample(grid)


def exp_error_bound(lam, w, breaks, degree):
    """Sup-norm bound of the degree-``degree`` Taylor remainder of ``e^{lam s} w``."""
    breaks = np.asarray(breaks, dtype=float)
    h = np.diff(breaks)
    a = breaks[:-1]
    z = abs(lam) * h
    re = float(np.real(lam))
    rem = z ** (degree + 1) / factorial(degree + 1) * np.exp(max(re, 0.0) * h)
    return float(np.linalg.norm(w) * np.max(np.exp(re * a) * rem))


def exp_tensor(lam, w, degree=EXP_DEGREE, tol=EXP_TOL, domain=(0.0, 1.0)):
    """Certified piecewise-Taylor profile of ``s -> e^{lam s} w``.

    Cells are halved until :func:`exp_error_bound` is at most ``tol``.
    """
    w = np.atleast_1d(np.asarray(w))
    a, b = domain
    ncells = 1
    while True:
        breaks = np.linspace(a, b, ncells + 1)
        if lam == 0 or exp_error_bound(lam, w, breaks, degree) <= tol or ncells >= 1 << 14:
            break
        ncells *= 2
    if lam == 0:
        return PiecewisePoly.constant(w, domain)
    k = np.arange(degree + 1)
    taylor = np.array([lam**j / factorial(j) for j in k])
    scale = np.exp(lam * breaks[:-1])
    coeffs = scale[:, None, None] * taylor[None, :, None] * w[None, None, :]
    return PiecewisePoly(breaks, coeffs)


def _gram_sqnorm(f):
    """``int |f|^2`` from per-cell Gram matrices of the monomial basis."""
    d1 = f.degree + 1
    jk = np.add.outer(np.arange(d1), np.arange(d1)) + 1
    total = 0.0
    for i, h in enumerate(np.diff(f.breaks)):
        G = h**jk / jk
        c = f.coeffs[i]
        total += float(np.real(np.einsum("jd,jk,kd->", c.conj(), G, c)))
    return max(total, 0.0)


def _real_parts(f):
    if np.iscomplexobj(f.coeffs):
        return np.concatenate([f.coeffs.real, f.coeffs.imag], axis=2)
    return f.coeffs


def lp_norm(f, p=2):
    """L^p norm with the Euclidean norm on values, ``p`` in {1, 2, inf}."""
    if p == 2:
        return float(np.sqrt(_gram_sqnorm(f)))
    c_all = _real_parts(f)
    widths = np.diff(f.breaks)
    P = np.polynomial.polynomial
    if p in (np.inf, "inf"):
        best = 0.0
        for i, h in enumerate(widths):
            c = c_all[i]
            sq = np.zeros(2 * c.shape[0] - 1)
            for j in range(c.shape[1]):
                sq = P.polyadd(sq, P.polymul(c[:, j], c[:, j]))
            xs = [0.0, h] + _real_roots_in(P.polyder(sq), 0.0, h)
            xs.extend(np.linspace(0.0, h, 2 * c.shape[0] + 1)[1:-1])
            best = max(best, float(np.max(P.polyval(np.array(xs), sq))))
        return float(np.sqrt(max(best, 0.0)))
    if p == 1:
        total = 0.0
        for i, h in enumerate(widths):
            c = c_all[i]
            cuts = {0.0, h}
            for j in range(c.shape[1]):
                cuts.update(_real_roots_in(c[:, j], 0.0, h))
            cuts = sorted(cuts)
            if c.shape[1] == 1:
                anti = P.polyint(c[:, 0])
                for lo, hi in zip(cuts, cuts[1:]):
                    total += abs(P.polyval(hi, anti) - P.polyval(lo, anti))
            else:
                q = max(24, 2 * c.shape[0] + 4)
                x, wts = np.polynomial.legendre.leggauss(q)
                for lo, hi in zip(cuts, cuts[1:]):
                    xs = lo + 0.5 * (hi - lo) * (x + 1.0)
                    vals = np.stack([P.polyval(xs, c[:, j]) for j in range(c.shape[1])], axis=1)
                    total += 0.5 * (hi - lo) * float(np.sum(wts * np.linalg.norm(vals, axis=1)))
        return float(total)
    raise ValueError(f"unsupported p={p!r}; use 1, 2 or inf")


# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExtendedState:
    """State ``(f, d)`` of the network flow with dynamic vertex conditions."""

    f: PiecewisePoly
    d: np.ndarray

    __array_ufunc__ = None

    def __post_init__(self):
        d = np.atleast_1d(np.array(self.d))
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @classmethod
    def zero(cls, m, n):
        return cls(PiecewisePoly.zeros(m), np.zeros(n))

    def __add__(self, other):
        return ExtendedState(self.f + other.f, self.d + other.d)

    def __sub__(self, other):
        return ExtendedState(self.f - other.f, self.d - other.d)

    def __mul__(self, c):
        return ExtendedState(self.f * c, self.d * c)

    __rmul__ = __mul__

    def norm(self, p=2):
        """Product norm ``(|f|_p^p + |d|^p)^{1/p}`` (max for p = inf)."""
        nf, nd = lp_norm(self.f, p), float(np.linalg.norm(self.d))
        if p in (np.inf, "inf"):
            return max(nf, nd)
        return float((nf**p + nd**p) ** (1.0 / p))


def state_to_text(x, hex_floats=False):
    """Function document for a state; extended states add a ``vertex:`` line."""
    if isinstance(x, ExtendedState):
        fmt = float.hex if hex_floats else repr
        return x.f.to_text(hex_floats) + "vertex: " + " ".join(fmt(float(v)) for v in x.d) + "\n"
    return x.to_text(hex_floats)


def state_from_text(text):
    """Inverse of :func:`state_to_text`."""
    poly, extra = _parse_poly(text)
    vertex = extra.pop("vertex", None)
    if extra:
        raise ValueError(f"unexpected keys in state document: {sorted(extra)}")
    if vertex is None:
        return poly
    return ExtendedState(poly, np.array([_parse_float(t) for t in vertex]))


def sup_distance(x, y):
    """Sup-norm distance for functions, or for extended states (max of parts)."""
    if isinstance(x, ExtendedState):
        return max(lp_norm(x.f - y.f, np.inf), float(np.linalg.norm(x.d - y.d)))
    return lp_norm(x - y, np.inf)
