"""Randomized invariant suites, run by ``netreach selftest``.

Each suite draws its cases from one seeded generator and returns a
:class:`SuiteResult`.  ``quick=True`` shrinks the case counts so the whole
run stays well under five seconds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import control, generators, network, reach, semigroup
from .funcspace import ExtendedState, lp_norm, refine_to_common_breakpoints

__all__ = ["SuiteResult", "SUITES", "run_suites"]


@dataclass
class SuiteResult:
    name: str
    passed: int
    total: int
    worst: float
    seconds: float
    notes: list

    @property
    def ok(self):
        return self.passed == self.total


def _exact_equal(f, g):
    f, g = refine_to_common_breakpoints(f, g)
    d = max(f.degree, g.degree)
    return np.array_equal(f._pad(d).coeffs, g._pad(d).coeffs)


def suite_relations(rng, quick):
    cases = 20 if quick else 100
    ok, worst = 0, 0.0
    for i in range(cases):
        mode = "dynamic" if i % 2 else "static"
        spec = generators.random_network(rng, free_w_in=mode == "dynamic")
        rep = network.validate_relations(network.build_matrices(spec, mode))
        w = max(v for v in rep.residuals().values() if v is not None)
        worst = max(worst, w)
        ok += rep.passed(1e-12)
    return ok, cases, worst, []


def suite_semigroup(rng, quick):
    cases = 5 if quick else 30
    ok, worst = 0, 0.0
    for _ in range(cases):
        m = int(rng.integers(1, 4))
        B = rng.integers(-2, 3, (m, m)) / 2.0
        sys = semigroup.StaticSystem(B, np.ones(m))
        f = generators.random_dyadic_poly(rng, m)
        t, s = rng.integers(0, 17, 2) / 8.0
        lhs = semigroup.static_apply_T(sys, semigroup.static_apply_T(sys, f, s), t)
        rhs = semigroup.static_apply_T(sys, f, t + s)
        exact = _exact_equal(lhs, rhs)
        one = lp_norm(semigroup.static_apply_T(sys, f, 1.0) - f.apply(B), np.inf)

        spec = generators.random_network(rng, n_max=4, m_max=6, free_w_in=True)
        dsys = semigroup.DynamicSystem(network.build_matrices(spec, "dynamic"), 0)
        x = ExtendedState(generators.random_poly(rng, dsys.m, degree=2), rng.standard_normal(dsys.n))
        t, s = rng.uniform(0, 1.5, 2)
        a = semigroup.dynamic_apply_T_long(dsys, semigroup.dynamic_apply_T_long(dsys, x, s), t)
        b = semigroup.dynamic_apply_T_long(dsys, x, t + s)
        dyn = lp_norm(a.f - b.f, np.inf) + float(np.linalg.norm(a.d - b.d))
        worst = max(worst, one, dyn)
        ok += exact and one == 0.0 and dyn <= 1e-10
    return ok, cases, worst, []


def suite_admissibility(rng, quick):
    cases = 4 if quick else 20
    ok, worst = 0, 0.0
    for _ in range(cases):
        spec = generators.random_network(rng, n_max=4, m_max=6)
        smats = network.build_matrices(spec, "static")
        dmats = network.build_matrices(spec, "dynamic")
        lam = float(rng.uniform(0.2, 2.0)) + max(semigroup.growth_bound_surrogate(smats.B), 0.0)
        alpha, beta = np.sort(rng.uniform(0, 1, 2))
        v = float(rng.uniform(0.5, 2.0))
        r1 = semigroup.admissibility_identity_check(
            semigroup.StaticSystem.from_network(smats, 0), lam, alpha, beta, v
        )
        r2 = semigroup.admissibility_identity_check(semigroup.DynamicSystem(dmats, 0), lam, alpha, beta, v)
        worst = max(worst, r1, r2)
        ok += max(r1, r2) <= 1e-9
    return ok, cases, worst, []


def suite_krylov(rng, quick):
    cases = 40 if quick else 200
    ok = 0
    for _ in range(cases):
        m = int(rng.integers(1, 7))
        B, b = generators.random_integer_pair(rng, m)
        rep = reach.krylov_reach(B, b)
        K = np.column_stack([np.linalg.matrix_power(B, k) @ b for k in range(m)])
        ok += rep.l == np.linalg.matrix_rank(K) and rep.l <= rep.minpoly_degree <= m
    return ok, cases, 0.0, []


def suite_cone(rng, quick):
    cases = 20 if quick else 100
    ok, flagged = 0, 0
    for _ in range(cases):
        m = int(rng.integers(1, 5))
        B, b = generators.random_nonnegative_pair(rng, m)
        rep = reach.cone_reach(B, b)
        gens = np.array([np.linalg.matrix_power(B, k) @ b for k in range(4 * m)]).T
        oracle = all(
            scipy.optimize.linprog(np.zeros(4 * m), A_eq=gens, b_eq=np.eye(m)[i], bounds=(0, None)).status == 0
            for i in range(m)
        )
        certs_ok = all(c.verified for c in rep.certificates if not c.feasible)
        if rep.flagged:
            flagged += 1
            ok += certs_ok
        else:
            ok += rep.positive_controllable == oracle and certs_ok
    return ok, cases, 0.0, [f"{flagged} flagged"]


def suite_steering(rng, quick):
    cases = 3 if quick else 20
    ok, worst = 0, 0.0
    for _ in range(cases):
        m = int(rng.integers(1, 7))
        B, b = generators.random_pair(rng, m)
        sys = semigroup.StaticSystem(B, b)
        target = generators.random_poly(rng, m, degree=2)
        res = control.synthesize(sys, target, m)
        chk = control.verify_closed_loop(sys, res)
        worst = max(worst, res.residual_to_target, chk.simulated_vs_target)
        ok += res.residual_to_target <= 1e-8 and chk.simulated_vs_target <= 1e-8
    return ok, cases, worst, []


def suite_positivity(rng, quick):
    cases = 4 if quick else 20
    ok, worst = 0, 0.0
    for _ in range(cases):
        m = int(rng.integers(1, 5))
        B, b = generators.random_nonnegative_pair(rng, m)
        sys = semigroup.StaticSystem(B, b)
        n = int(rng.integers(1, 4))
        u = generators.random_control(rng, n, nonnegative=True)
        chk = control.verify_closed_loop(sys, control.forward(sys, u))
        pos = reach.positivity_preservation_check(B, b)
        worst = min(worst, chk.min_state, pos.resolvent_min)
        ok += chk.min_state >= -1e-12 and pos.passed(1e-12) and chk.passed
    return ok, cases, worst, []


def suite_dynamic(rng, quick):
    cases = 3 if quick else 10
    ok, worst = 0, 0.0
    for i in range(cases):
        spec = generators.random_network(rng, n_max=4, m_max=6, free_w_in=True)
        sys = semigroup.DynamicSystem(network.build_matrices(spec, "dynamic"), 0)
        l = 2 + i % 2
        u = generators.random_control(rng, l)
        x = control.controllability_map_dynamic(sys, u)
        y = control.semigroup_map_dynamic(sys, u)
        chk = control.verify_closed_loop(sys, control.forward(sys, u))
        r = lp_norm(x.f - y.f, np.inf) + float(np.linalg.norm(x.d - y.d))
        worst = max(worst, r, chk.simulated_vs_predicted)
        ok += r <= 1e-10 and chk.passed
    return ok, cases, worst, []


SUITES = {
    "relations": suite_relations,
    "semigroup": suite_semigroup,
    "admissibility": suite_admissibility,
    "krylov": suite_krylov,
    "cone": suite_cone,
    "steering": suite_steering,
    "positivity": suite_positivity,
    "dynamic": suite_dynamic,
}


def run_suites(seed=0, quick=False, names=None):
    """Run the selected suites, each from its own child of ``seed``."""
    names = list(SUITES) if names is None else list(names)
    children = np.random.SeedSequence(seed).spawn(len(SUITES))
    streams = dict(zip(SUITES, children))
    out = []
    for name in names:
        rng = np.random.default_rng(streams[name])
        t0 = time.perf_counter()
        try:
            passed, total, worst, notes = SUITES[name](rng, quick)
        except Exception as exc:  # a crash counts as a failed suite, not an aborted run
            passed, total, worst, notes = 0, 1, float("nan"), [f"error: {type(exc).__name__}: {exc}"]
        out.append(SuiteResult(name, int(passed), int(total), float(worst), time.perf_counter() - t0, notes))
    return out
