import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netreach.funcspace import ExtendedState, PiecewisePoly, refine_to_common_breakpoints, sup_distance
from netreach.generators import random_dyadic_poly, random_network, random_poly
from netreach.network import NetworkSpec, build_matrices
from netreach.semigroup import (
    DynamicSystem,
    SingularResolventError,
    StaticSystem,
    admissibility_identity_check,
    compatibility_defect,
    default_lambda,
    dynamic_apply_T,
    dynamic_apply_T_long,
    dynamic_dirichlet,
    dynamic_power_formula,
    dynamic_T1,
    exponential_identity_check,
    inject,
    resolvent_apply,
    static_apply_T,
    static_dirichlet,
)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def two_cycle(mode="static", w_in=None):
    spec = NetworkSpec(n=2, edges=[(0, 1), (1, 0)], w_out=[1.0, 1.0], w_in=w_in)
    return build_matrices(spec, mode)


def exact_equal(f, g):
    f, g = refine_to_common_breakpoints(f, g)
    d = max(f.degree, g.degree)
    return np.array_equal(f._pad(d).coeffs, g._pad(d).coeffs)


def test_static_shift_example():
    sys = StaticSystem(SWAP, np.array([1.0, 0.0]))
    f = PiecewisePoly.from_coefficients([[0.0, 0.0], [1.0, 0.0]])
    g = static_apply_T(sys, f, 0.5)
    assert np.allclose(g(0.25), [0.75, 0.0])
    assert np.allclose(g(0.75), [0.0, 0.25])
    assert static_apply_T(sys, f, 0.0) is f
    with pytest.raises(ValueError):
        static_apply_T(sys, f, -1.0)


def test_static_T1_is_B():
    rng = np.random.default_rng(0)
    for _ in range(10):
        m = int(rng.integers(1, 5))
        B = rng.standard_normal((m, m))
        f = random_poly(rng, m)
        out = static_apply_T(StaticSystem(B, np.ones(m)), f, 1.0)
        assert sup_distance(out, f.apply(B)) <= 1e-13


def test_static_semigroup_law_exact():
    rng = np.random.default_rng(1)
    for _ in range(30):
        m = int(rng.integers(1, 4))
        sys = StaticSystem(rng.integers(-2, 3, (m, m)) / 2.0, np.ones(m))
        f = random_dyadic_poly(rng, m)
        t, s = rng.integers(0, 25, 2) / 8.0
        lhs = static_apply_T(sys, static_apply_T(sys, f, s), t)
        assert exact_equal(lhs, static_apply_T(sys, f, t + s))


def test_dynamic_T1_on_vertex_state():
    mats = two_cycle("dynamic")
    sys = DynamicSystem(mats, 0)
    d = np.array([2.0, -1.0])
    y = dynamic_T1(sys, ExtendedState(PiecewisePoly.zeros(2), d))
    assert np.allclose(y.f(0.3), mats.Psi @ d)
    assert np.array_equal(y.d, d)


def test_dynamic_T_block_formula():
    spec = NetworkSpec(n=2, edges=[(0, 1), (1, 0), (0, 0)], w_out=[0.5, 1.0, 0.5], w_in=[0.3, 0.9, 1.0])
    sys = DynamicSystem(build_matrices(spec, "dynamic"), 0)
    rng = np.random.default_rng(2)
    f = random_poly(rng, 3, degree=2)
    d = rng.standard_normal(2)
    t = 0.3
    y = dynamic_apply_T(sys, ExtendedState(f, d), t)
    F = f.integral()
    for s in (0.1, 0.5, 0.69):
        assert np.allclose(y.f(s), f(t + s), atol=1e-14)
    for s in (0.71, 0.9):
        want = sys.B @ F(t + s - 1) + sys.Psi @ d
        assert np.allclose(y.f(s), want, atol=1e-14)
    assert np.allclose(y.d, sys.mats.PhiPlusW @ F(t) + d, atol=1e-14)
    with pytest.raises(ValueError):
        dynamic_apply_T(sys, ExtendedState(f, d), 1.5)


def test_dynamic_system_needs_dynamic_mode():
    with pytest.raises(ValueError):
        DynamicSystem(two_cycle("static"), 0)
    with pytest.raises(ValueError):
        DynamicSystem(two_cycle("dynamic"), 5)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_dynamic_semigroup_law(seed):
    rng = np.random.default_rng(seed)
    spec = random_network(rng, n_max=4, m_max=6, free_w_in=True)
    sys = DynamicSystem(build_matrices(spec, "dynamic"), int(rng.integers(spec.n)))
    x = ExtendedState(random_poly(rng, sys.m, degree=2), rng.standard_normal(sys.n))
    t, s = rng.uniform(0, 2.0, 2)
    a = dynamic_apply_T_long(sys, dynamic_apply_T_long(sys, x, s), t)
    b = dynamic_apply_T_long(sys, x, t + s)
    assert sup_distance(a, b) <= 1e-10


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_power_formula(k):
    rng = np.random.default_rng(10 + k)
    spec = random_network(rng, n_max=4, m_max=6, free_w_in=True)
    sys = DynamicSystem(build_matrices(spec, "dynamic"), 0)
    g = random_poly(rng, sys.n, degree=2)
    x = ExtendedState(g.apply(sys.Psi), np.zeros(sys.n))
    for _ in range(k):
        x = dynamic_T1(sys, x)
    assert sup_distance(x.f, dynamic_power_formula(sys, g, k)) <= 1e-10


def test_static_dirichlet_boundary_condition():
    rng = np.random.default_rng(3)
    B = rng.uniform(0, 1, (3, 3))
    d = rng.standard_normal(3)
    sys = StaticSystem(B, d)
    lam = default_lambda(B)
    q = static_dirichlet(sys, lam)
    # a lam-eigenfunction of d/ds with x(1) - B x(0) = d
    assert np.allclose(q.left_limit(1.0) - B @ q(0.0), d, atol=1e-12)
    assert np.allclose(q.derivative()(0.4), lam * q(0.4), atol=1e-10)


def test_dynamic_dirichlet_vertex_component():
    mats = two_cycle("dynamic", w_in=[0.5, 1.0])
    sys = DynamicSystem(mats, 1)
    lam = 0.7
    q = dynamic_dirichlet(sys, lam)
    # the edge profile is e^{lam s} times a fixed vector
    assert np.allclose(q.f(0.5), np.exp(0.5 * lam) * q.f(0.0), atol=1e-13)
    with pytest.raises(ValueError):
        dynamic_dirichlet(sys, 0.0)


def test_resolvent_refuses_spectrum():
    with pytest.raises(SingularResolventError):
        resolvent_apply(1.0, np.eye(2), np.ones(2))
    assert np.allclose(resolvent_apply(3.0, np.eye(2), np.ones(2)), [0.5, 0.5])


@pytest.mark.parametrize("dynamic", [False, True])
def test_admissibility_identities(dynamic):
    rng = np.random.default_rng(4 + dynamic)
    for _ in range(5):
        spec = random_network(rng, n_max=4, m_max=6)
        mats = build_matrices(spec, "dynamic" if dynamic else "static")
        sys = DynamicSystem(mats, 0) if dynamic else StaticSystem.from_network(mats, 0)
        lam = float(rng.uniform(0.3, 2.0))
        a, b = np.sort(rng.uniform(0, 1, 2))
        assert admissibility_identity_check(sys, lam, a, b, v=1.3) <= 1e-9
        assert exponential_identity_check(sys, lam, v=0.7) <= 1e-9


def test_inject():
    u = PiecewisePoly.from_coefficients([[1.0], [2.0]])
    sys = StaticSystem(SWAP, np.array([1.0, 0.0]))
    assert np.allclose(inject(sys, u)(0.5), [2.0, 0.0])
    dsys = DynamicSystem(two_cycle("dynamic"), 1)
    x = inject(dsys, u)
    assert np.allclose(x.f(0.5), [0.0, 2.0]) and np.array_equal(x.d, [0.0, 0.0])


def test_compatibility_defect_warns():
    sys = DynamicSystem(two_cycle("dynamic"), 0)
    good = ExtendedState(PiecewisePoly.constant([1.0, 2.0]), [1.0, 2.0])
    assert compatibility_defect(sys, good) == 0.0
    bad = ExtendedState(PiecewisePoly.constant([1.0, 2.0]), [0.0, 0.0])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert compatibility_defect(sys, bad) > 0
    assert rec


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_mass_conservation(seed):
    # columns of a network B sum to one, so the total edge mass is invariant
    rng = np.random.default_rng(seed)
    spec = random_network(rng)
    mats = build_matrices(spec)
    sys = StaticSystem.from_network(mats, 0)
    f = random_poly(rng, sys.m)
    t = float(rng.uniform(0, 3))
    mass = lambda g: float(np.sum(g.total_integral()))
    assert mass(static_apply_T(sys, f, t)) == pytest.approx(mass(f), abs=1e-11)
