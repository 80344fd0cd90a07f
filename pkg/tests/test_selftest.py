import time

import numpy as np

from netreach import selftest
from netreach.selftest import SUITES, run_suites


def test_quick_suites_pass_fast():
    t0 = time.perf_counter()
    results = run_suites(seed=0, quick=True)
    assert time.perf_counter() - t0 < 5.0
    assert [r.name for r in results] == list(SUITES)
    assert all(r.ok for r in results), [r for r in results if not r.ok]


def test_deterministic_under_seed():
    a = run_suites(seed=11, quick=True, names=["relations", "cone"])
    b = run_suites(seed=11, quick=True, names=["relations", "cone"])
    assert [(r.passed, r.worst, r.notes) for r in a] == [(r.passed, r.worst, r.notes) for r in b]


def test_corrupted_install_is_detected(monkeypatch):
    # a broken intertwining matrix must show up as a failing suite
    real = selftest.network.build_matrices

    def broken(spec, mode="static"):
        mats = real(spec, mode)
        B = np.array(mats.B)
        B[0, 0] += 1e-6
        return type(mats)(mats.A, B, mats.Psi, mats.PhiMinus, mats.PhiPlusW, mats.mode)

    monkeypatch.setattr(selftest.network, "build_matrices", broken)
    (res,) = run_suites(seed=0, quick=True, names=["relations"])
    assert not res.ok and res.worst >= 1e-7


def test_crashing_suite_is_reported(monkeypatch):
    def boom(rng, quick):
        raise RuntimeError("boom")

    monkeypatch.setitem(SUITES, "krylov", boom)
    (res,) = run_suites(seed=0, quick=True, names=["krylov"])
    assert not res.ok and "boom" in res.notes[0]
