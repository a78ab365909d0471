"""Passage times with no horizon.

Jumps j(y, v) = (2 - y) v with v uniform on (0, 1) move the state a fraction
v of the way from y to 2, so the jump never overshoots the level 1 by more
than 1.  Together with a drift bounded below by 1 the passage time is finite
almost surely, which is what the unbounded sampler needs.
"""

import math

import numpy as np

from exactfpt import DriftSpec, FptProblem, JumpSpec, RngStream, oracle
from exactfpt.jumpfpt import JUMP_HIT, sample_jump_fpt

n = 10_000
L = 1.0
jumps = JumpSpec(1.0, "uniform", (0.0, 1.0), "(1+1-y)*v")


def B(y):
    return 2 * y - math.cos(y)


for y0 in (-1.0, -3.0):
    drift = DriftSpec("2+sin(y)", kappa=5.0, beta_plus=B(L) - B(y0), y_anchor=y0,
                      beta_expr="2*y-cos(y)")
    b = sample_jump_fpt(drift, jumps, FptProblem(y0, L), n, RngStream(int(-y0)))
    over = b.position[b.kind == JUMP_HIT] - L
    q = np.quantile(b.time, [0.1, 0.5, 0.9])
    print(f"y0 = {y0:g}")
    print(f"  tau quantiles 10/50/90%: {q[0]:.3f} {q[1]:.3f} {q[2]:.3f}")
    print(f"  crossed by a jump: {over.size / n:.1%}, overshoot in [{over.min():.4f}, {over.max():.4f}]")
    e = oracle.euler_fpt(drift, jumps, FptProblem(y0, L), 1e-4, n, RngStream(10 + int(-y0)))
    print(f"  KS vs Euler(h=1e-4): {oracle.two_sample_ks(b.time, e.time):.4f}")
