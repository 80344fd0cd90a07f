"""Command-line interface: ``netreach <command> [options]``.

Exit codes: 0 success (or controllable / reached), 3 negative verdict
(not controllable, target unreachable, self-test failure), 2 usage or input
error.  The default output directory can be set with ``NETREACH_OUT``.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .control import (
    NegativeTargetError,
    export_control_csv,
    synthesize,
    synthesize_positive,
    verify_closed_loop,
)
from .funcspace import ExtendedState, PiecewisePoly, lp_norm, state_from_text, state_to_text
from .network import NetworkError, build_matrices, load_network, validate_relations
from .reach import cone_reach, dynamic_reach_structure, krylov_reach, network_reach
from .report import Report
from .selftest import SUITES, run_suites
from .semigroup import (
    DynamicSystem,
    StaticSystem,
    dynamic_apply_T_long,
    static_apply_T,
)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NEGATIVE = 3
OUT_ENV = "NETREACH_OUT"

DEFAULT_TOL = {"matrices": 1e-12, "reach": 1e-9, "simulate": 1e-12, "steer": 1e-8, "selftest": 0.0}


class CLIError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    network: str | None
    mode: str
    vertex: int
    horizon: int | None
    tol: float
    target: str | None
    out: str | None
    seed: int
    positive: bool = False
    as_json: bool = False


def _config(args) -> RunConfig:
    tol = DEFAULT_TOL[args.command] if args.tol is None else args.tol
    if args.tol is not None and not args.tol > 0:
        raise CLIError("--tol must be positive")
    return RunConfig(
        command=args.command,
        network=getattr(args, "network", None),
        mode=args.mode,
        vertex=args.vertex,
        horizon=args.horizon,
        tol=tol,
        target=getattr(args, "target", None),
        out=args.out if args.out is not None else os.environ.get(OUT_ENV),
        seed=args.seed,
        positive=args.positive,
        as_json=args.json,
    )


def _read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}") from None


def _load(cfg):
    try:
        spec = load_network(cfg.network)
    except OSError as exc:
        raise CLIError(f"cannot read {cfg.network}: {exc.strerror}") from None
    mats = build_matrices(spec, cfg.mode)
    if not 1 <= cfg.vertex <= spec.n:
        raise CLIError(f"--vertex {cfg.vertex} outside 1..{spec.n}")
    return spec, mats


def _emit(cfg, report: Report, extra_files=()):
    text = report.to_json() if cfg.as_json else report.to_text()
    sys.stdout.write(text)
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        name = f"{cfg.command}.{'json' if cfg.as_json else 'txt'}"
        with open(os.path.join(cfg.out, name), "w", encoding="utf-8") as fh:
            fh.write(text)
        for fname, content in extra_files:
            with open(os.path.join(cfg.out, fname), "w", encoding="utf-8") as fh:
                fh.write(content)


def _base_report(cfg, spec=None):
    rep = Report(cfg.command, cfg.seed)
    if spec is not None:
        rep.add("network", cfg.network).add("mode", cfg.mode).add("n", spec.n).add("m", spec.m)
    return rep


# ----------------------------------------------------------------------
# commands


def cmd_matrices(cfg: RunConfig):
    spec, mats = _load(cfg)
    rel = validate_relations(mats, tol=cfg.tol)
    rep = _base_report(cfg, spec)
    for name in ("A", "B", "Psi", "PhiMinus", "PhiPlusW"):
        rep.add(name, np.asarray(getattr(mats, name)))
    rep.add("lambda", rel.lam)
    for key, val in rel.residuals().items():
        rep.add("residual " + key, val)
    rep.add("notices", rel.notices)
    ok = rel.passed(cfg.tol)
    rep.add("tol", cfg.tol).add("relations_pass", ok)
    _emit(cfg, rep)
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_reach(cfg: RunConfig):
    spec, mats = _load(cfg)
    vtx = cfg.vertex - 1
    net = network_reach(mats, vtx)
    rep = _base_report(cfg, spec)
    rep.add("vertex", cfg.vertex)
    rep.add("krylov_dim", net.l)
    rep.add("minpoly_degree", net.edge.minpoly_degree)
    rep.add("horizon", net.horizon)
    rep.add("vertex_form_dim", net.vertex.l)
    rep.add("form_angle_residual", net.angle_residual)
    rep.add("basis", net.edge.basis)
    if cfg.mode == "dynamic":
        dyn = dynamic_reach_structure(DynamicSystem(mats, vtx))
        rep.add("directions", dyn.directions)
        rep.add("grades", " ".join(str(g) for g in dyn.grades))
        rep.add("approx_controllable", net.exact_controllable)
    else:
        rep.add("exact_controllable", net.exact_controllable)
    verdict = net.exact_controllable
    if cfg.positive:
        b = mats.Psi[:, vtx]
        cone = cone_reach(mats.B, b, tol=cfg.tol)
        rep.add("cone_K", cone.K)
        rep.add("cone_extra_ray", cone.extra_ray)
        rep.add("positive_controllable", cone.positive_controllable)
        rep.add("closure_controllable", cone.closure_controllable)
        rep.add("orbit_axes", " ".join(str(i + 1) for i in cone.orbit_axes) or "none")
        rep.add("closure_sensitive", cone.closure_sensitive)
        rep.add("truncation_sensitive", cone.truncation_sensitive)
        for c in cone.certificates:
            if not c.feasible:
                rep.add(f"farkas_phi[{c.axis + 1}]", c.phi)
                rep.add(f"farkas_verified[{c.axis + 1}]", c.verified)
        verdict = cone.positive_controllable
    rep.add("controllable", verdict)
    _emit(cfg, rep)
    return EXIT_OK if verdict else EXIT_NEGATIVE


def cmd_simulate(cfg: RunConfig, state_path, t):
    if t < 0:
        raise CLIError("--time must be nonnegative")
    spec, mats = _load(cfg)
    x = state_from_text(_read_text(state_path))
    vtx = cfg.vertex - 1
    if cfg.mode == "dynamic":
        sysd = DynamicSystem(mats, vtx)
        if not isinstance(x, ExtendedState):
            x = ExtendedState(x, np.zeros(spec.n))
        y = dynamic_apply_T_long(sysd, x, t)
    else:
        if isinstance(x, ExtendedState):
            raise CLIError("static mode takes a state without a 'vertex:' line")
        y = static_apply_T(StaticSystem.from_network(mats, vtx), x, t)
    rep = _base_report(cfg, spec)
    rep.add("time", float(t))
    rep.add("state_in", state_path)
    norm = y.norm(2) if isinstance(y, ExtendedState) else lp_norm(y, 2)
    rep.add("l2_norm", norm)
    doc = state_to_text(y, hex_floats=True)
    _emit(cfg, rep, [("state.txt", doc)])
    if not cfg.out:
        sys.stdout.write(doc)
    return EXIT_OK


def cmd_steer(cfg: RunConfig, samples):
    spec, mats = _load(cfg)
    if cfg.mode == "dynamic":
        raise CLIError("steering is only available in static mode; dynamic mode supports forward evaluation")
    if cfg.target is None:
        raise CLIError("steer needs --target FILE")
    target = PiecewisePoly.from_text(_read_text(cfg.target))
    vtx = cfg.vertex - 1
    sysm = StaticSystem.from_network(mats, vtx)
    n = cfg.horizon if cfg.horizon is not None else krylov_reach(sysm.B, sysm.b).horizon
    if cfg.positive:
        res = synthesize_positive(sysm, target, n, tol=cfg.tol)
    else:
        res = synthesize(sysm, target, n, tol=cfg.tol)
    chk = verify_closed_loop(sysm, res, tol=cfg.tol)
    rep = _base_report(cfg, spec)
    rep.add("vertex", cfg.vertex).add("horizon", n).add("synthesis_mode", res.mode)
    rep.add("residual_to_target", res.residual_to_target)
    rep.add("simulated_vs_predicted", chk.simulated_vs_predicted)
    rep.add("simulated_vs_target", chk.simulated_vs_target)
    rep.add("grid_cells", chk.cells).add("grid_nodes", chk.nodes).add("grid_aligned", chk.aligned)
    rep.add("tol", cfg.tol)
    reached = res.reached and chk.simulated_vs_target <= cfg.tol
    if cfg.positive and not res.reached:
        cone = cone_reach(sysm.B, sysm.b)
        for c in cone.certificates:
            if not c.feasible:
                rep.add(f"farkas_phi[{c.axis + 1}]", c.phi)
    rep.add("verified", chk.passed)
    rep.add("reached", reached)
    files = [
        ("control.txt", res.control.u.to_text(hex_floats=True)),
        ("control.csv", export_control_csv(res.control, samples)),
    ]
    _emit(cfg, rep, files)
    if not chk.passed:
        return EXIT_ERROR
    return EXIT_OK if reached else EXIT_NEGATIVE


def cmd_selftest(cfg: RunConfig, quick, names):
    results = run_suites(cfg.seed, quick=quick, names=names)
    rep = Report("selftest", cfg.seed)
    rep.add("quick", quick)
    for r in results:
        rep.add(f"suite {r.name}", f"{r.passed}/{r.total} {'pass' if r.ok else 'FAIL'}")
        rep.add(f"suite {r.name} worst", r.worst)
        for note in r.notes:
            rep.add(f"suite {r.name} note", note)
    npass = sum(r.ok for r in results)
    rep.add("suites_passed", npass).add("suites_failed", len(results) - npass)
    _emit(cfg, rep)
    return EXIT_OK if npass == len(results) else EXIT_NEGATIVE


# ----------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("static", "dynamic"), default="static")
    common.add_argument("--vertex", type=int, default=1, help="control vertex, 1-based (default 1)")
    common.add_argument("--horizon", type=int, default=None, help="steering horizon n (integer time)")
    common.add_argument("--positive", action="store_true", help="use nonnegative controls / the positive cone")
    common.add_argument("--tol", type=float, default=None, help="tolerance (command-specific default)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized suites (default 0)")
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV}, else stdout only)")
    common.add_argument("--json", action="store_true", help="write the report as JSON")

    p = argparse.ArgumentParser(prog="netreach", description="Reachability of transport flows on networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("matrices", parents=[common], help="graph matrices and relation residuals")
    s.add_argument("network")
    s = sub.add_parser("reach", parents=[common], help="reachability verdicts")
    s.add_argument("network")
    s = sub.add_parser("simulate", parents=[common], help="evolve a state with the semigroup")
    s.add_argument("network")
    s.add_argument("--state", required=True, help="state document (function format)")
    s.add_argument("--time", type=float, required=True)
    s = sub.add_parser("steer", parents=[common], help="synthesize and verify a steering control")
    s.add_argument("network")
    s.add_argument("--target", required=True, help="target state document")
    s.add_argument("--samples", type=int, default=201, help="rows in the control CSV")
    s = sub.add_parser("selftest", parents=[common], help="run the randomized invariant suites")
    s.add_argument("--quick", action="store_true")
    s.add_argument("--suite", action="append", choices=sorted(SUITES), help="run only these suites")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "matrices":
            return cmd_matrices(cfg)
        if args.command == "reach":
            return cmd_reach(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.state, args.time)
        if args.command == "steer":
            return cmd_steer(cfg, args.samples)
        return cmd_selftest(cfg, args.quick, args.suite)
    except (CLIError, NetworkError, NegativeTargetError, ValueError) as exc:
        print(f"netreach {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
