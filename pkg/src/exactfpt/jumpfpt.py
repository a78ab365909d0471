"""First passage for jump diffusions by composing exact segment samplers.

Between two jump times the path is the continuous diffusion, so each segment
is one stopped-couple draw.  A segment either ends in a diffusion hit, or a
jump moves the state (possibly over the level), or the horizon truncates it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from ._jit import NJIT_OPTS
from .exactcore import (MAX_SEGMENTS, SAMPLE_DRAWS, STATUS, ST_NONFINITE, ST_SEGMENT_CAP,
                        Telemetry, _charge, _raise_if_bad, hz_kernel, make_limits, new_stats, sd_kernel)
from .model import DriftSpec, FptProblem, JumpSpec
from .randkit import RngStream, exponential, uniform

njit = numba.njit(**NJIT_OPTS)

DIFFUSION_HIT = 0
JUMP_HIT = 1
HORIZON_CAPPED = 2
KIND_NAMES = ("diffusion-hit", "jump-hit", "horizon-capped")


class FptOutcome(NamedTuple):
    time: float
    position: float
    kind: str
    jumps_consumed: int
    segment_count: int

    def overshoot(self, level: float) -> float:
        """Distance above the level for a jump hit, else 0."""
        return self.position - level if self.kind == "jump-hit" else 0.0


@njit
def draw_mark(gen, mark_kind, p1, p2):
    if mark_kind == 1:
        return exponential(gen, 1.0 / p1)
    return uniform(gen, p1, p2)


@njit
def jump_fpt_kernel(gen, gamma, beta, jump, gamma_zero, anchor, kappa, beta_plus,
                    rate, mark_kind, p1, p2, t0, y0, L, horizon, st, lim):
    """One outcome ``(time, position, kind, jumps, segments)``.

    ``horizon`` may be ``inf``; ``mark_kind == 0`` or ``rate == 0`` means no jumps.
    """
    if y0 >= L:
        return t0, L, DIFFUSION_HIT, 0, 0
    jumps_on = mark_kind != 0 and rate > 0.0
    ts = t0
    y = y0
    jumps = 0
    segs = 0
    while True:
        segs += 1
        if segs > lim[MAX_SEGMENTS]:
            st[STATUS] = ST_SEGMENT_CAP
            return ts, y, -1, jumps, segs - 1
        tf = ts + exponential(gen, 1.0 / rate) if jumps_on else math.inf
        if jumps_on:
            _charge(st, 1)
        if tf >= horizon:
            tend = horizon
        else:
            tend = tf
        if tend == math.inf:
            tau = hz_kernel(gen, gamma, gamma_zero, anchor, kappa, ts, y, L, st, lim)
            if st[STATUS] != 0:
                return ts, y, -1, jumps, segs
            return tau, L, DIFFUSION_HIT, jumps, segs
        t, z, hit = sd_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus,
                              ts, tend, y, L, st, lim)
        if st[STATUS] != 0:
            return ts, y, -1, jumps, segs
        if hit:
            return t, L, DIFFUSION_HIT, jumps, segs
        if tf >= horizon:
            return horizon, z, HORIZON_CAPPED, jumps, segs
        v = draw_mark(gen, mark_kind, p1, p2)
        _charge(st, 1)
        y = z + jump(tf, z, v)
        jumps += 1
        if not math.isfinite(y):
            st[STATUS] = ST_NONFINITE
            return tf, y, -1, jumps, segs
        if y >= L:
            return tf, y, JUMP_HIT, jumps, segs
        ts = tf


@njit
def jump_fpt_batch(gen, gamma, beta, jump, gamma_zero, anchor, kappa, beta_plus,
                   rate, mark_kind, p1, p2, t0, y0, L, horizon, n,
                   out_t, out_y, out_kind, out_jumps, out_segs, st, lim):
    for i in range(n):
        st[SAMPLE_DRAWS] = 0
        t, y, k, j, s = jump_fpt_kernel(gen, gamma, beta, jump, gamma_zero, anchor, kappa,
                                        beta_plus, rate, mark_kind, p1, p2, t0, y0, L,
                                        horizon, st, lim)
        out_t[i] = t
        out_y[i] = y
        out_kind[i] = k
        out_jumps[i] = j
        out_segs[i] = s
        if st[STATUS] != 0:
            return i
    return n


# ---------------------------------------------------------------------------
# Python API


@dataclass
class OutcomeBatch:
    """Outcomes of ``n`` draws in draw order; ``kind`` holds integer codes."""

    time: np.ndarray
    position: np.ndarray
    kind: np.ndarray
    jumps_consumed: np.ndarray
    segment_count: np.ndarray
    telemetry: Telemetry

    def __len__(self) -> int:
        return len(self.time)

    def outcome(self, i: int) -> FptOutcome:
        return FptOutcome(float(self.time[i]), float(self.position[i]), KIND_NAMES[self.kind[i]],
                          int(self.jumps_consumed[i]), int(self.segment_count[i]))

    def kind_counts(self) -> dict[str, int]:
        counts = np.bincount(self.kind, minlength=3) if len(self.kind) else np.zeros(3, int)
        return {name: int(c) for name, c in zip(KIND_NAMES, counts)}


def _check_jd(problem: FptProblem, want_finite: bool) -> None:
    if want_finite and not problem.finite_horizon:
        raise ValueError("sjd_fpt needs a finite horizon; use jd_fpt for an infinite one")
    if not want_finite and problem.finite_horizon:
        raise ValueError("jd_fpt needs horizon = inf; use sjd_fpt for a finite one")


def sample_jump_fpt(drift: DriftSpec, jumps: JumpSpec, problem: FptProblem, n: int, s: RngStream, *,
                    max_draws: int | None = None, max_segments: int | None = None) -> OutcomeBatch:
    """Draw ``n`` first-passage outcomes on one stream.

    A finite horizon gives the stopped law of the SJD algorithm, an infinite
    one the JD law.  With an infinite horizon the passage time must be finite
    almost surely; otherwise the draw cap raises a diagnostic.
    """
    k = drift.kernels
    st = new_stats()
    lim = make_limits(max_draws=max_draws, max_segments=max_segments)
    out_t, out_y = np.empty(n), np.empty(n)
    out_k, out_j, out_s = (np.empty(n, dtype=np.int64) for _ in range(3))
    p1, p2 = jumps.params
    done = jump_fpt_batch(s.generator, k.gamma, k.beta, jumps.kernel, k.gamma_zero, drift.y_anchor,
                          drift.kappa, drift.beta_plus, float(jumps.rate), jumps.mark_kind, p1, p2,
                          float(problem.t0), float(problem.y0), float(problem.level),
                          float(problem.horizon), n, out_t, out_y, out_k, out_j, out_s, st, lim)
    if done < n:
        _raise_if_bad(st, f"after {done} of {n} samples; failing sample at time {out_t[done]:.6g}, "
                          f"state {out_y[done]:.6g}, {out_s[done]} segments, {out_j[done]} jumps")
    return OutcomeBatch(out_t, out_y, out_k, out_j, out_s, Telemetry.from_stats(st))


def sjd_fpt(drift: DriftSpec, jumps: JumpSpec, problem: FptProblem, s: RngStream, **caps) -> FptOutcome:
    """``(tau ^ horizon, position)`` for the jump diffusion with a finite horizon.

    A horizon-capped outcome reports the state at the horizon, which is
    extra information on top of the capped time itself.
    """
    _check_jd(problem, True)
    return sample_jump_fpt(drift, jumps, problem, 1, s, **caps).outcome(0)


def jd_fpt(drift: DriftSpec, jumps: JumpSpec, problem: FptProblem, s: RngStream, **caps) -> FptOutcome:
    """First-passage outcome with no horizon; the passage must be a.s. finite."""
    _check_jd(problem, False)
    return sample_jump_fpt(drift, jumps, problem, 1, s, **caps).outcome(0)
