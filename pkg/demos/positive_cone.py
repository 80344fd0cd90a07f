"""Compare exact and positive reachability on small nonnegative systems.

A cycle of three edges is reachable both ways.  A single "half" matrix
(every edge feeds both edges with weight 1/2) is exactly controllable for a
generic input but the cone of nonnegative reachable states stays thin; the
Farkas vector printed below separates an axis from that cone.
"""
import numpy as np

from netreach.control import synthesize_positive, verify_closed_loop
from netreach.funcspace import PiecewisePoly
from netreach.reach import cone_reach, krylov_reach, positivity_preservation_check
from netreach.semigroup import StaticSystem


def show(name, B, b):
    print(f"--- {name}")
    exact = krylov_reach(B, b)
    cone = cone_reach(B, b)
    print(f"exact controllable: {exact.exact_controllable} (l = {exact.l})")
    print(f"positive controllable: {cone.positive_controllable}, flagged: {cone.flagged}")
    for c in cone.certificates:
        if not c.feasible:
            print(f"  axis {c.axis + 1} unreachable, phi = {np.round(c.phi, 4)}, verified {c.verified}")
    pos = positivity_preservation_check(B, b)
    print(f"positivity check passed: {pos.passed(1e-12)}")
    return cone


def main():
    P = np.roll(np.eye(3), 1, axis=0)
    e1 = np.array([1.0, 0.0, 0.0])
    show("three-cycle", P, e1)

    sys = StaticSystem(P, e1)
    target = PiecewisePoly.constant([1.0, 1.0, 1.0])
    res = synthesize_positive(sys, target, 3)
    chk = verify_closed_loop(sys, res)
    print(f"nonnegative control to the constant state: residual {res.residual_to_target:.3g}, "
          f"min control {float(res.control.u.component_min()[0]):.3g}, min state {chk.min_state:.3g}")

    half = np.full((2, 2), 0.5)
    show("half matrix", half, np.array([1.0, 0.0]))


if __name__ == "__main__":
    main()
