"""Independent checks for the exact samplers.

Closed-form laws, a jump-adapted Euler scheme with Brownian-bridge crossing
correction, and Kolmogorov-Smirnov utilities.  The Euler scheme is biased;
its bias shrinks with the step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np
from scipy import special, stats

from . import exprlang as ex
from ._jit import NJIT_OPTS, build_functions
from .exactcore import Telemetry
from .jumpfpt import DIFFUSION_HIT, HORIZON_CAPPED, JUMP_HIT, OutcomeBatch
from .model import DriftSpec, FptProblem, GeneralSde, JumpSpec
from .randkit import RngStream, exponential, uniform01_open
from .jumpfpt import draw_mark

njit = numba.njit(**NJIT_OPTS)

# Euler outcomes past t_max on an infinite horizon
CENSORED = 3


# ---------------------------------------------------------------------------
# closed forms


def bm_fpt_cdf(t, d):
    """P(tau <= t) for standard Brownian motion and a level at distance ``d``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = special.erfc(d / np.sqrt(2.0 * np.where(t > 0, t, np.nan)))
    out = np.where(t > 0, out, 0.0)
    return out if out.ndim else float(out)


def inverse_gaussian_cdf(t, mean, shape):
    t = np.asarray(t, dtype=float)
    tp = np.where(t > 0, t, np.nan)
    r = np.sqrt(shape / tp)
    a = special.ndtr(r * (tp / mean - 1.0))
    # exp(2 shape / mean) * Phi(-r (t/mean + 1)), in logs to avoid overflow
    b = np.exp(2.0 * shape / mean + special.log_ndtr(-r * (tp / mean + 1.0)))
    out = np.where(t > 0, np.clip(a + b, 0.0, 1.0), 0.0)
    out = np.where(np.isinf(t) & (t > 0), 1.0, out)
    return out if out.ndim else float(out)


def cbm_cdf(T, L, x):
    """CDF of ``B_T`` given that ``B`` stays below ``L > 0`` on ``[0, T]``."""
    x = np.asarray(x, dtype=float)
    if np.any(x > L):
        raise ValueError("cbm_cdf is supported on x <= L")
    s = math.sqrt(T)
    num = special.ndtr(x / s) - special.ndtr((x - 2.0 * L) / s)
    den = special.ndtr(L / s) - special.ndtr(-L / s)
    out = np.clip(num / den, 0.0, 1.0)
    return out if out.ndim else float(out)


def cbm_acceptance_probability(T, L):
    """Per-attempt acceptance of the CBM loop: ``Phi(a) - Phi(-a)`` with ``a = L / sqrt(T)``."""
    a = L / math.sqrt(T)
    phi_a = special.ndtr(a)
    c = phi_a / (phi_a - special.ndtr(-a))
    return float(phi_a / c)


def normal_cdf(mean: float, var: float) -> Callable:
    sd = math.sqrt(var)
    return lambda x: special.ndtr((np.asarray(x, dtype=float) - mean) / sd)


# ---------------------------------------------------------------------------
# empirical distribution and KS


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF; ``+inf`` entries carry censored mass."""

    values: np.ndarray

    def __init__(self, sample):
        v = np.sort(np.asarray(sample, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empty sample")
        if np.isnan(v).any():
            raise ValueError("sample contains NaN")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.size

    def left(self, x):
        return np.searchsorted(self.values, x, side="left") / self.size


def _as_ecdf(s) -> Ecdf:
    return s if isinstance(s, Ecdf) else Ecdf(s)


def ks_statistic(sample, cdf: Callable) -> float:
    """sup |F_n - F| for a continuous (or right-continuous) ``cdf``; exact at sample points."""
    e = _as_ecdf(sample)
    x = e.values[np.isfinite(e.values)]
    u = np.unique(x)
    if u.size == 0:
        return 1.0
    F = np.asarray(cdf(u), dtype=float)
    above = e(u) - F
    below = F - e.left(u)
    return float(max(above.max(), below.max(), 0.0))


def two_sample_ks(a, b) -> float:
    ea, eb = _as_ecdf(a), _as_ecdf(b)
    pts = np.concatenate([ea.values, eb.values])
    pts = pts[np.isfinite(pts)]
    if pts.size == 0:
        return 0.0
    return float(np.abs(ea(pts) - eb(pts)).max())


def ks_pvalue(d: float, n: int, m: int | None = None) -> float:
    """p-value of a KS statistic, exact one-sample or asymptotic two-sample."""
    if m is None:
        return float(stats.kstwo.sf(d, n))
    ne = n * m / (n + m)
    return float(special.kolmogorov(math.sqrt(ne) * d))


def histogram(sample, bin_count: int, range_: tuple[float, float] | None = None):
    """Equal-width bins, half-open except the last; returns ``(edges, counts)``."""
    x = np.asarray(sample, dtype=float)
    if x.size == 0 and range_ is None:
        raise ValueError("empty sample needs an explicit range")
    counts, edges = np.histogram(x[np.isfinite(x)], bins=bin_count, range=range_)
    return edges, counts


# ---------------------------------------------------------------------------
# Euler--Maruyama oracle


@njit
def _unit(t, y):
    return 1.0


@njit
def _no_jump(t, y, v):
    return 0.0


@njit
def euler_path(gen, mu, sigma, jump, rate, mark_kind, p1, p2, t0, y0, L, horizon, h, t_max, bridge):
    """One jump-adapted Euler path; returns ``(time, position, kind, jumps, steps)``."""
    if y0 >= L:
        return t0, L, DIFFUSION_HIT, 0, 0
    jumps_on = mark_kind != 0 and rate > 0.0
    end = min(horizon, t_max)
    t = t0
    x = y0
    k = 0
    jumps = 0
    steps = 0
    next_jump = t0 + exponential(gen, 1.0 / rate) if jumps_on else math.inf
    while True:
        node = t0 + (k + 1) * h
        t_next = min(node, next_jump, end)
        if t_next == node:
            k += 1
        dt = t_next - t
        s = sigma(t, x)
        xn = x + mu(t, x) * dt + s * math.sqrt(dt) * gen.standard_normal()
        steps += 1
        if xn >= L:
            return t_next, L, DIFFUSION_HIT, jumps, steps
        if bridge:
            p = math.exp(-2.0 * (L - x) * (L - xn) / (s * s * dt))
            if uniform01_open(gen) < p:
                return t_next, L, DIFFUSION_HIT, jumps, steps
        t = t_next
        x = xn
        if t == next_jump:
            v = draw_mark(gen, mark_kind, p1, p2)
            x = x + jump(t, x, v)
            jumps += 1
            if x >= L:
                return t, x, JUMP_HIT, jumps, steps
            next_jump = t + exponential(gen, 1.0 / rate)
        if t >= end:
            if end == horizon:
                return horizon, x, HORIZON_CAPPED, jumps, steps
            return math.inf, x, CENSORED, jumps, steps


@njit
def euler_batch(gen, mu, sigma, jump, rate, mark_kind, p1, p2, t0, y0, L, horizon, h, t_max,
                bridge, n, out_t, out_y, out_k, out_j, out_s):
    for i in range(n):
        t, y, kd, j, s = euler_path(gen, mu, sigma, jump, rate, mark_kind, p1, p2, t0, y0, L,
                                    horizon, h, t_max, bridge)
        out_t[i] = t
        out_y[i] = y
        out_k[i] = kd
        out_j[i] = j
        out_s[i] = s


@njit
def euler_endpoint_batch(gen, mu, sigma, t0, y0, T, h, L, conditioned, n, out, max_tries):
    """Euler endpoint at ``T``; with ``conditioned`` only paths staying below ``L`` count.

    Returns the number of paths simulated (accepted plus discarded).
    """
    tries = 0
    i = 0
    while i < n:
        if tries >= max_tries:
            return -tries
        tries += 1
        t = t0
        x = y0
        k = 0
        crossed = False
        while t < T:
            t_next = min(t0 + (k + 1) * h, T)
            k += 1
            dt = t_next - t
            s = sigma(t, x)
            xn = x + mu(t, x) * dt + s * math.sqrt(dt) * gen.standard_normal()
            if conditioned:
                if xn >= L or uniform01_open(gen) < math.exp(-2.0 * (L - x) * (L - xn) / (s * s * dt)):
                    crossed = True
                    break
            x = xn
            t = t_next
        if not crossed:
            out[i] = x
            i += 1
    return tries


def _coefficients(model) -> tuple[Callable, Callable]:
    if isinstance(model, DriftSpec):
        return model.kernels.alpha, _unit
    if isinstance(model, GeneralSde):
        src = {
            "mu": f"def mu(t, y):\n    return {ex.to_python(model.mu)}\n",
            "sigma": f"def sigma(t, y):\n    return {ex.to_python(model.sigma)}\n",
        }
        fns = build_functions(("euler", ex.serialize(model.mu), ex.serialize(model.sigma)), src, {})
        return fns["mu"], fns["sigma"]
    raise TypeError("model must be a DriftSpec or a GeneralSde")


def euler_fpt(model, jumps: JumpSpec | None, problem: FptProblem, h: float, n: int, s: RngStream, *,
              t_max: float = 100.0, bridge: bool = True) -> OutcomeBatch:
    """Biased first-passage sampler on a jump-adapted grid of step ``h``.

    ``model`` is a :class:`DriftSpec` (unit diffusion coefficient) or a
    :class:`GeneralSde`, whose own jump spec is used when ``jumps`` is None.
    With an infinite horizon, paths still running at ``t_max`` get kind
    ``CENSORED`` and time ``inf``.
    ``segment_count`` holds the number of Euler steps.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if jumps is None:
        jumps = model.jump if isinstance(model, GeneralSde) else JumpSpec()
    mu, sigma = _coefficients(model)
    jfn = jumps.kernel if jumps.active else _no_jump
    p1, p2 = jumps.params
    out_t, out_y = np.empty(n), np.empty(n)
    out_k, out_j, out_s = (np.empty(n, dtype=np.int64) for _ in range(3))
    euler_batch(s.generator, mu, sigma, jfn, float(jumps.rate), jumps.mark_kind, p1, p2,
                float(problem.t0), float(problem.y0), float(problem.level), float(problem.horizon),
                float(h), float(t_max), bool(bridge), n, out_t, out_y, out_k, out_j, out_s)
    return OutcomeBatch(out_t, out_y, out_k, out_j, out_s, Telemetry())


def euler_endpoint(model, y0: float, T: float, h: float, n: int, s: RngStream, *, t0: float = 0.0,
                   level: float | None = None, max_tries: int | None = None) -> np.ndarray:
    """Euler endpoints at ``T``; with ``level`` set, conditioned on not crossing it."""
    mu, sigma = _coefficients(model)
    out = np.empty(n)
    cond = level is not None
    tries = euler_endpoint_batch(s.generator, mu, sigma, float(t0), float(y0), float(T), float(h),
                                 float(level) if cond else math.inf, cond, n, out,
                                 int(max_tries) if max_tries else 1000 * max(n, 1))
    if tries < 0:
        raise RuntimeError(f"conditioned Euler: fewer than {n} surviving paths in {-tries} tries")
    return out


__all__ = [
    "CENSORED", "Ecdf", "bm_fpt_cdf", "cbm_acceptance_probability", "cbm_cdf", "euler_endpoint",
    "euler_fpt", "histogram", "inverse_gaussian_cdf", "ks_pvalue", "ks_statistic", "normal_cdf",
    "two_sample_ks",
]
