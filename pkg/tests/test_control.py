import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netreach.control import (
    ControlSignal,
    NegativeTargetError,
    assemble,
    controllability_map_dynamic,
    controllability_map_static,
    dynamic_map_terms,
    export_control_csv,
    forward,
    segment,
    semigroup_map_dynamic,
    semigroup_map_static,
    simulate_characteristics,
    synthesize,
    synthesize_positive,
    verify_closed_loop,
)
from netreach.funcspace import PiecewisePoly, lp_norm, sup_distance
from netreach.generators import random_control, random_network, random_nonnegative_pair, random_pair, random_poly
from netreach.network import NetworkSpec, build_matrices
from netreach.reach import krylov_reach, membership_exact
from netreach.semigroup import DynamicSystem, StaticSystem

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
E1 = np.array([1.0, 0.0])
RAMP2 = ControlSignal(PiecewisePoly([0.0, 2.0], [[[0.0], [1.0]]]))
TARGET = PiecewisePoly.from_coefficients([[0.0, 1.0], [1.0, -1.0]])


def dyn_two_cycle(w_in=None):
    spec = NetworkSpec(2, [(0, 1), (1, 0)], [1.0, 1.0], w_in=w_in)
    return DynamicSystem(build_matrices(spec, "dynamic"), 0)


def test_segment_ramp():
    u0, u1 = segment(RAMP2)
    s = np.linspace(0, 1, 9)
    assert np.allclose(u0(s)[:, 0], 1 + s) and np.allclose(u1(s)[:, 0], s)
    assert segment(RAMP2, 2)[0].domain == (0.0, 1.0)
    with pytest.raises(ValueError):
        segment(ControlSignal(PiecewisePoly.constant([1.0], (0.0, 1.5))))
    with pytest.raises(ValueError):
        segment(RAMP2, 3)


def test_segment_constant_and_roundtrip():
    c = ControlSignal(PiecewisePoly.constant([2.0], (0.0, 3.0)))
    segs = segment(c)
    assert all(sup_distance(s, segs[0]) == 0 for s in segs)
    u = ControlSignal(random_poly(np.random.default_rng(0), 1, domain=(0.0, 3.0)))
    back = assemble(segment(u))
    r = np.linspace(0, 3, 100, endpoint=False)
    assert np.allclose(back(r), u(r), atol=1e-13)


def test_control_signal_validation():
    with pytest.raises(ValueError):
        ControlSignal(PiecewisePoly.constant([1.0, 2.0]))
    with pytest.raises(ValueError):
        ControlSignal(PiecewisePoly.constant([1.0], (1.0, 2.0)))
    assert RAMP2.T == 2.0


def test_static_map_examples():
    sys = StaticSystem(SWAP, E1)
    x = controllability_map_static(sys, RAMP2)
    s = np.linspace(0, 1, 7)
    assert np.allclose(x(s), np.stack([1 + s, s], axis=1))
    zero = ControlSignal(PiecewisePoly.zeros(1, (0.0, 2.0)))
    assert lp_norm(controllability_map_static(sys, zero), np.inf) == 0.0
    u = ControlSignal(random_poly(np.random.default_rng(1), 1))
    assert sup_distance(controllability_map_static(sys, u), segment(u)[0].tensor(E1)) == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_static_map_consistency_and_linearity(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    sys = StaticSystem(*random_pair(rng, m))
    u, v = random_control(rng, n), random_control(rng, n)
    a = float(rng.standard_normal())
    x = controllability_map_static(sys, u)
    assert sup_distance(x, semigroup_map_static(sys, u)) <= 1e-10 * max(1, lp_norm(x, np.inf))
    lin = controllability_map_static(sys, a * u + v)
    ref = a * x + controllability_map_static(sys, v)
    assert sup_distance(lin, ref) <= 1e-12 * max(1, lp_norm(ref, np.inf))


def test_dynamic_map_examples():
    sys = dyn_two_cycle()
    u0 = PiecewisePoly.from_coefficients([[1.0], [2.0]])
    u = assemble([u0, PiecewisePoly.zeros(1)])
    x = controllability_map_dynamic(sys, u)
    assert sup_distance(x.f, u0.tensor(sys.b)) <= 1e-15
    u = assemble([PiecewisePoly.zeros(1), PiecewisePoly.constant([1.0])])
    x = controllability_map_dynamic(sys, u)
    Bb = sys.B @ sys.b
    s = np.linspace(0, 1, 5)
    assert np.allclose(x.f(s), s[:, None] * Bb[None, :], atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_dynamic_map_linear_and_consistent(seed):
    rng = np.random.default_rng(seed)
    spec = random_network(rng, n_max=4, m_max=6, free_w_in=True)
    sys = DynamicSystem(build_matrices(spec, "dynamic"), int(rng.integers(spec.n)))
    l = int(rng.integers(2, 4))
    u, v = random_control(rng, l), random_control(rng, l)
    x = controllability_map_dynamic(sys, u)
    y = semigroup_map_dynamic(sys, u)
    assert sup_distance(x, y) <= 1e-10
    lin = controllability_map_dynamic(sys, 2.0 * u + v)
    ref = 2.0 * x + controllability_map_dynamic(sys, v)
    assert sup_distance(lin, ref) <= 1e-12 * max(1.0, lp_norm(ref.f, np.inf))


def test_dynamic_grading():
    rng = np.random.default_rng(3)
    spec = random_network(rng, n_max=3, m_max=5, free_w_in=True)
    sys = DynamicSystem(build_matrices(spec, "dynamic"), 0)
    if np.linalg.norm(sys.B @ sys.b) == 0:
        pytest.skip("degenerate draw")
    segs = [PiecewisePoly.from_coefficients(rng.standard_normal((2, 1))) for _ in range(4)]
    terms = dynamic_map_terms(sys, assemble(segs))
    for k, term in enumerate(terms):
        assert term.effective_degree(1e-14) >= segs[k].effective_degree() + k


def test_synthesize_two_cycle():
    sys = StaticSystem(SWAP, E1)
    res = synthesize(sys, TARGET, 2)
    assert res.mode == "exact" and res.residual_to_target == 0.0
    s = np.linspace(0, 1, 9, endpoint=False)
    assert np.allclose(res.control(1 + s), s) and np.allclose(res.control(s), 1 - s)
    chk = verify_closed_loop(sys, res)
    assert chk.simulated_vs_target <= 1e-10 and chk.passed and chk.aligned


def test_synthesize_outside_span():
    sys = StaticSystem(np.eye(2), E1)
    res = synthesize(sys, PiecewisePoly.constant([0.0, 1.0]), 2)
    assert res.mode == "least-squares"
    assert res.residual_to_target == pytest.approx(1.0)
    assert lp_norm(res.predicted_final, np.inf) == 0.0
    rep = krylov_reach(sys.B, sys.b)
    assert res.residual_to_target == pytest.approx(membership_exact(res.target, rep).residual)
    with pytest.raises(ValueError):
        synthesize(sys, PiecewisePoly.constant([0.0, 1.0]), 0)
    with pytest.raises(ValueError):
        synthesize(sys, PiecewisePoly.constant([0.0]), 2)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_synthesize_recovers_image(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    B, b = random_pair(rng, m)
    B[:, -1] = B[:, 0]  # make the pointwise system rank deficient sometimes
    sys = StaticSystem(B, b)
    n = m + 1
    target = controllability_map_static(sys, random_control(rng, n))
    res = synthesize(sys, target, n)
    assert sup_distance(res.predicted_final, target) <= 1e-10 * max(1, lp_norm(target, np.inf))


def test_synthesize_positive_examples():
    cyc = np.roll(np.eye(3), 1, axis=0)
    res = synthesize_positive(StaticSystem(cyc, np.eye(3)[0]), PiecewisePoly.constant([1.0, 1.0, 1.0]), 3)
    assert res.residual_to_target <= 1e-14 and res.mode == "nonnegative"
    assert np.allclose(res.control(np.linspace(0, 3, 13, endpoint=False)), 1.0)
    half = StaticSystem(np.full((2, 2), 0.5), E1)
    res = synthesize_positive(half, PiecewisePoly.constant([0.0, 1.0]), 2)
    assert res.residual_to_target > 0.5 and not res.reached
    res = synthesize_positive(half, PiecewisePoly.zeros(2), 2)
    assert lp_norm(res.control.u, np.inf) == 0.0
    with pytest.raises(NegativeTargetError):
        synthesize_positive(half, PiecewisePoly.constant([-1.0, 1.0]), 2)


def test_synthesize_positive_nonconstant_target():
    cyc = np.roll(np.eye(3), 1, axis=0)
    sys = StaticSystem(cyc, np.eye(3)[0])
    target = PiecewisePoly.from_coefficients([[1.0, 0.0, 2.0], [-1.0, 1.0, 0.5]])
    res = synthesize_positive(sys, target, 3)
    assert res.residual_to_target <= 1e-12
    assert np.min(res.control.u.component_min()) >= 0
    chk = verify_closed_loop(sys, res)
    assert chk.passed and chk.min_state >= -1e-12


def test_closed_loop_zero_control():
    sys = StaticSystem(SWAP, E1)
    res = forward(sys, ControlSignal(PiecewisePoly.zeros(1, (0.0, 2.0))))
    chk = verify_closed_loop(sys, res)
    assert chk.simulated_vs_predicted == 0.0 and chk.min_state == 0.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_closed_loop_positivity(seed):
    rng = np.random.default_rng(seed)
    B, b = random_nonnegative_pair(rng, int(rng.integers(1, 5)))
    sys = StaticSystem(B, b)
    u = random_control(rng, int(rng.integers(1, 4)), nonnegative=True)
    chk = verify_closed_loop(sys, forward(sys, u))
    assert chk.min_state >= -1e-12 and chk.passed


def test_characteristics_dynamic_matches():
    sys = dyn_two_cycle(w_in=[0.5, 1.0])
    u = random_control(np.random.default_rng(4), 3)
    chk = verify_closed_loop(sys, forward(sys, u))
    assert chk.passed and chk.vertex_vs_predicted <= 1e-10


def test_characteristics_explicit_grid():
    sys = StaticSystem(SWAP, E1)
    run = simulate_characteristics(sys, RAMP2, cells=4, nodes=3)
    assert run.cells == 4 and run.aligned
    assert np.allclose(run.values, np.stack([1 + run.s, run.s], axis=1))


def test_export_csv():
    text = export_control_csv(RAMP2, 3)
    assert text.splitlines() == ["r,u", "0.0,0.0", "1.0,1.0", "2.0,2.0"]
