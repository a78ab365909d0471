"""Exact samplers against laws we can write down.

Run with ``python demos/01_closed_form_checks.py``.  Each block draws a
sample, prints a KS distance to the closed form, and the 5% critical value
for that sample size so the number has a scale.
"""

import math

import numpy as np

from exactfpt import DriftSpec, FptProblem, JumpSpec, RngStream, oracle
from exactfpt.exactcore import sample_hz
from exactfpt.jumpfpt import sample_jump_fpt

n = 20_000
crit = 1.36 / math.sqrt(n)
print(f"n = {n}, 5% critical KS ~ {crit:.4f}\n")

# Driftless case.  With alpha = 0 the Girsanov weight is 1, so the sampler
# returns the Brownian passage time from distance 2 directly; its CDF is
# 2 Phi(-2 / sqrt(t)).
zero = DriftSpec("0", kappa=1.0, beta_plus=0.0)
b = sample_jump_fpt(zero, JumpSpec(), FptProblem(-1.0, 1.0), n, RngStream(1))
ks = oracle.ks_statistic(b.time, lambda t: oracle.bm_fpt_cdf(t, 2.0))
print(f"Brownian passage, distance 2:   KS {ks:.4f}")
# the median m solves 2 Phi(-2 / sqrt(m)) = 1/2
print(f"   median {np.median(b.time):.3f} (theory {(2 / 0.6744897501960817) ** 2:.3f})")

# Constant drift 1.5: passage time is inverse Gaussian with mean d/mu and
# shape d^2.  gamma = mu^2/2 = 1.125 is constant, so kappa only has to sit
# above it; the tighter kappa is, the fewer Poisson points per proposal.
for stream, kappa in enumerate((1.2, 3.0)):
    drift = DriftSpec("1.5", kappa=kappa, beta_plus=10.0)
    r = sample_hz(drift, FptProblem(-1.0, 1.0), n, RngStream(2, stream))
    ks = oracle.ks_statistic(r.values, lambda t: oracle.inverse_gaussian_cdf(t, 4 / 3, 4.0))
    rates = r.telemetry.acceptance_rates()
    print(f"drift 1.5, kappa {kappa}:         KS {ks:.4f}   hz acceptance {rates['hz']:.3f}")

# The acceptance rate of the HZ loop is E exp(-int gamma) under the Brownian
# proposal, which is exp(-(B(L) - B(y0))) = exp(-1.5 * 2) here.
print(f"   theory exp(-3) = {math.exp(-3):.3f}\n")

# Conditioned Brownian endpoint: B_1 given max_{[0,1]} B < 1.
rng = RngStream(3)
x = np.array([rng.cbm_sample(1.0, 1.0) for _ in range(n)])
ks = oracle.ks_statistic(x, lambda u: oracle.cbm_cdf(1.0, 1.0, np.minimum(u, 1.0)))
print(f"conditioned BM endpoint:        KS {ks:.4f}   max {x.max():.4f} < 1")
