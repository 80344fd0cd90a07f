"""Network descriptions and the structure matrices built from them.

Vertices and edges are 0-based in Python; network files and the command
line use 1-based vertex labels ``1..n``.

For an edge ``e`` from vertex ``tail(e)`` to vertex ``head(e)`` with outgoing
weight ``w_out[e]`` and incoming weight ``w_in[e]``:

* ``Psi[e, tail(e)] = w_out[e]``       (weighted outgoing incidence, transposed)
* ``PhiMinus[tail(e), e] = 1``         (unweighted outgoing incidence)
* ``PhiPlusW[head(e), e] = w_in[e]``   (weighted incoming incidence)
* static mode: ``A[head(e), tail(e)] += w_out[e]`` and
  ``B[i, j] = w_out[i]`` whenever ``tail(e_i) == head(e_j)``
* dynamic mode: ``A = PhiPlusW @ Psi`` and ``B = Psi @ PhiPlusW``
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

__all__ = [
    "STOCHASTIC_TOL",
    "NetworkError",
    "NetworkParseError",
    "NetworkSpec",
    "GraphMatrices",
    "RelationReport",
    "build_matrices",
    "validate_relations",
    "parse_network",
    "serialize_network",
    "load_network",
]

STOCHASTIC_TOL = 1e-9

Mode = Literal["static", "dynamic"]


class NetworkError(ValueError):
    pass


class NetworkParseError(NetworkError):
    def __init__(self, message, lineno=None, line=None):
        self.lineno = lineno
        self.line = line
        if lineno is not None:
            message = f"line {lineno}: {message} ({line.strip()!r})"
        super().__init__(message)


@dataclass(frozen=True)
class NetworkSpec:
    """Weighted directed multigraph with ``n`` vertices.

    ``edges[k] = (tail, head)``; the outgoing weights of each vertex must sum
    to one.  ``w_in`` defaults to ``w_out``.
    """

    n: int
    edges: tuple
    w_out: tuple
    w_in: tuple | None = None
    edge_ids: tuple | None = None

    def __post_init__(self):
        edges = tuple((int(t), int(h)) for t, h in self.edges)
        w_out = tuple(float(w) for w in self.w_out)
        w_in = w_out if self.w_in is None else tuple(float(w) for w in self.w_in)
        ids = tuple(f"e{k + 1}" for k in range(len(edges))) if self.edge_ids is None else tuple(
            str(i) for i in self.edge_ids
        )
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "w_out", w_out)
        object.__setattr__(self, "w_in", w_in)
        object.__setattr__(self, "edge_ids", ids)

        if self.n < 1 or not edges:
            raise NetworkError("a network needs at least one vertex and one edge")
        if not (len(w_out) == len(w_in) == len(ids) == len(edges)):
            raise NetworkError("edges, weights and ids must have equal length")
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate edge ids")
        for k, (t, h) in enumerate(edges):
            if not (0 <= t < self.n and 0 <= h < self.n):
                raise NetworkError(f"edge {ids[k]} references a vertex outside 1..{self.n}")
        for k, (wo, wi) in enumerate(zip(w_out, w_in)):
            if not (0.0 <= wo <= 1.0 and 0.0 <= wi <= 1.0):
                raise NetworkError(f"edge {ids[k]}: weights must lie in [0, 1]")
        sums = np.zeros(self.n)
        has_out = np.zeros(self.n, dtype=bool)
        for (t, _), w in zip(edges, w_out):
            sums[t] += w
            has_out[t] = True
        for j in range(self.n):
            if not has_out[j]:
                raise NetworkError(f"vertex {j + 1} has no outgoing edge")
            if abs(sums[j] - 1.0) > STOCHASTIC_TOL:
                raise NetworkError(
                    f"vertex {j + 1}: outgoing weights sum to {sums[j]!r}, not 1"
                )

    @property
    def m(self):
        return len(self.edges)

    @property
    def tails(self):
        return np.array([t for t, _ in self.edges])

    @property
    def heads(self):
        return np.array([h for _, h in self.edges])


@dataclass(frozen=True)
class GraphMatrices:
    A: np.ndarray
    B: np.ndarray
    Psi: np.ndarray
    PhiMinus: np.ndarray
    PhiPlusW: np.ndarray
    mode: Mode = "static"

    def __post_init__(self):
        for name in ("A", "B", "Psi", "PhiMinus", "PhiPlusW"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n, m = self.PhiMinus.shape
        shapes = {"A": (n, n), "B": (m, m), "Psi": (m, n), "PhiPlusW": (n, m)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.mode not in ("static", "dynamic"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def n(self):
        return self.PhiMinus.shape[0]

    @property
    def m(self):
        return self.PhiMinus.shape[1]


def build_matrices(spec: NetworkSpec, mode: Mode = "static") -> GraphMatrices:
    n, m = spec.n, spec.m
    tails, heads = spec.tails, spec.heads
    w_out = np.array(spec.w_out)
    w_in = np.array(spec.w_in)
    edges = np.arange(m)

    Psi = np.zeros((m, n))
    Psi[edges, tails] = w_out
    PhiMinus = np.zeros((n, m))
    PhiMinus[tails, edges] = 1.0
    PhiPlusW = np.zeros((n, m))
    PhiPlusW[heads, edges] = w_in

    if mode == "static":
        A = np.zeros((n, n))
        np.add.at(A, (heads, tails), w_out)
        B = np.where(tails[:, None] == heads[None, :], w_out[:, None], 0.0)
    elif mode == "dynamic":
        A = PhiPlusW @ Psi
        B = Psi @ PhiPlusW
    else:
        raise ValueError(f"unknown mode {mode!r}")

    col = Psi.sum(axis=0)
    bad = np.nonzero(np.abs(col - 1.0) > STOCHASTIC_TOL)[0]
    if bad.size:
        raise NetworkError(f"vertex {bad[0] + 1}: Psi column sums to {col[bad[0]]!r}")
    return GraphMatrices(A=A, B=B, Psi=Psi, PhiMinus=PhiMinus, PhiPlusW=PhiPlusW, mode=mode)


@dataclass
class RelationReport:
    """Max-abs residuals of the graph-matrix identities."""

    intertwining: float
    left_inverse: float
    column_sums: float
    resolvent: float | None
    lam: float
    dynamic_A: float | None = None
    dynamic_B: float | None = None
    notices: list = field(default_factory=list)

    def residuals(self):
        out = {
            "Psi A - B Psi": self.intertwining,
            "PhiMinus Psi - I": self.left_inverse,
            "Psi column sums - 1": self.column_sums,
            "Psi R(lam,A) - R(lam,B) Psi": self.resolvent,
        }
        if self.dynamic_A is not None:
            out["A - PhiPlusW Psi"] = self.dynamic_A
            out["B - Psi PhiPlusW"] = self.dynamic_B
        return out

    def passed(self, tol=1e-12):
        return all(v <= tol for v in self.residuals().values() if v is not None)


def validate_relations(mats: GraphMatrices, tol: float = 1e-12) -> RelationReport:
    A, B, Psi = mats.A, mats.B, mats.Psi
    n, m = mats.n, mats.m
    lam = float(np.max(np.abs(np.linalg.eigvals(A)))) + 1.0
    notices = []
    eig_gap = min(
        np.min(np.abs(np.linalg.eigvals(A) - lam)),
        np.min(np.abs(np.linalg.eigvals(B) - lam)),
    )
    if eig_gap <= tol:
        resolvent = None
        notices.append(f"resolvent check skipped: lambda={lam!r} is within {tol} of the spectrum")
    else:
        RA = np.linalg.solve(lam * np.eye(n) - A, np.eye(n))
        RB_Psi = np.linalg.solve(lam * np.eye(m) - B, Psi)
        resolvent = float(np.max(np.abs(Psi @ RA - RB_Psi)))
    report = RelationReport(
        intertwining=float(np.max(np.abs(Psi @ A - B @ Psi))),
        left_inverse=float(np.max(np.abs(mats.PhiMinus @ Psi - np.eye(n)))),
        column_sums=float(np.max(np.abs(Psi.sum(axis=0) - 1.0))),
        resolvent=resolvent,
        lam=lam,
        notices=notices,
    )
    if mats.mode == "dynamic":
        report.dynamic_A = float(np.max(np.abs(A - mats.PhiPlusW @ Psi)))
        report.dynamic_B = float(np.max(np.abs(B - Psi @ mats.PhiPlusW)))
    return report


# ----------------------------------------------------------------------
# network files


def parse_network(text: str) -> NetworkSpec:
    """Parse the ``vertices:`` / ``edge:`` document format.

    ::

        # two-cycle
        vertices: 2
        edge: e1 1 2 1.0
        edge: e2 2 1 1.0 0.5    # optional incoming weight
    """
    n = None
    ids, edges, w_out, w_in = [], [], [], []
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        if not sep:
            raise NetworkParseError("expected 'key: value'", lineno, raw)
        key, toks = key.strip(), rest.split()
        if key == "vertices":
            if n is not None:
                raise NetworkParseError("'vertices' given twice", lineno, raw)
            if len(toks) != 1 or not toks[0].isdigit() or int(toks[0]) < 1:
                raise NetworkParseError("'vertices' needs one positive integer", lineno, raw)
            n = int(toks[0])
        elif key == "edge":
            if len(toks) not in (4, 5):
                raise NetworkParseError("edge needs: <id> <tail> <head> <w_out> [w_in]", lineno, raw)
            eid = toks[0]
            if eid in seen:
                raise NetworkParseError(f"duplicate edge id {eid!r} (first on line {seen[eid]})", lineno, raw)
            try:
                tail, head = int(toks[1]), int(toks[2])
                wo = float(toks[3])
                wi = float(toks[4]) if len(toks) == 5 else wo
            except ValueError:
                raise NetworkParseError("malformed number", lineno, raw) from None
            for w in (wo, wi):
                if not 0.0 <= w <= 1.0:
                    raise NetworkParseError(f"weight {w!r} outside [0, 1]", lineno, raw)
            if tail < 1 or head < 1:
                raise NetworkParseError("vertex labels start at 1", lineno, raw)
            seen[eid] = lineno
            ids.append(eid)
            edges.append((tail - 1, head - 1))
            w_out.append(wo)
            w_in.append(wi)
        else:
            raise NetworkParseError(f"unknown key {key!r}", lineno, raw)
    if n is None:
        raise NetworkParseError("missing 'vertices: <n>' line")
    for eid, (t, h) in zip(ids, edges):
        if t >= n or h >= n:
            raise NetworkParseError(
                f"edge {eid!r} references vertex {max(t, h) + 1} but only {n} vertices exist",
                seen[eid],
                f"edge: {eid}",
            )
    try:
        return NetworkSpec(n=n, edges=edges, w_out=w_out, w_in=w_in, edge_ids=ids)
    except NetworkError as exc:
        raise NetworkParseError(str(exc)) from None


def serialize_network(spec: NetworkSpec) -> str:
    lines = [f"vertices: {spec.n}"]
    for eid, (t, h), wo, wi in zip(spec.edge_ids, spec.edges, spec.w_out, spec.w_in):
        lines.append(f"edge: {eid} {t + 1} {h + 1} {wo!r} {wi!r}")
    return "\n".join(lines) + "\n"


def load_network(path) -> NetworkSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())
