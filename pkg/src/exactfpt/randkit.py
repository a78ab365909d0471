"""Seeded primitive samplers.

Every sampler is an ``njit`` function taking a numpy ``Generator`` so that the
exact algorithms can call them from compiled code.  :class:`RngStream` wraps
a Philox generator keyed by ``(seed, stream_id)`` and exposes the same
samplers as methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ._jit import NJIT_OPTS

njit = numba.njit(**NJIT_OPTS)

_SQRT2 = math.sqrt(2.0)
# below this probability of {X <= bound} the repeated-draw loop is replaced
_TAIL_SWITCH = 0.05


@dataclass
class RngStream:
    """Independent random stream identified by ``(seed, stream_id)``.

    Streams are single-owner: do not share one between threads.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def std_gaussian(self) -> float:
        return std_gaussian(self.generator)

    def exponential(self, mean: float) -> float:
        return exponential(self.generator, mean)

    def uniform(self, a: float = 0.0, b: float = 1.0) -> float:
        return uniform(self.generator, a, b)

    def gaussian3(self) -> tuple[float, float, float]:
        return gaussian3(self.generator)

    def brownian_fpt(self, distance: float) -> float:
        return brownian_fpt(self.generator, distance)

    def gaussian_below(self, variance: float, bound: float) -> float:
        return gaussian_below(self.generator, variance, bound)

    def cbm_sample(self, T: float, L: float, max_iter: int = 10**6) -> float:
        x, n = cbm_sample_counted(self.generator, T, L, max_iter)
        if n < 0:
            raise RuntimeError(f"cbm_sample: no acceptance in {max_iter} attempts (T={T}, L={L})")
        return x

    def brownian_bridge_increment(self, current: float, endpoint: float,
                                  remaining: float, step: float) -> float:
        return brownian_bridge_increment(self.generator, current, endpoint, remaining, step)

    def bessel3_bridge_point(self, duration, endpoint_distance, t_prev, t_next, delta_prev, level):
        delta = np.array(delta_prev, dtype=np.float64)
        pos = bessel3_bridge_point(self.generator, duration, endpoint_distance,
                                   t_prev, t_next, delta, level)
        return delta, pos


# ---------------------------------------------------------------------------
# elementary draws


@njit
def std_gaussian(gen):
    return gen.standard_normal()


@njit
def uniform01_open(gen):
    """Uniform on (0, 1): zero is redrawn."""
    u = gen.random()
    while u == 0.0:
        u = gen.random()
    return u


@njit
def uniform(gen, a, b):
    return a + (b - a) * gen.random()


@njit
def exponential(gen, mean):
    # inverse CDF on an open uniform keeps the result strictly positive
    return -mean * math.log(uniform01_open(gen))


@njit
def gaussian3(gen):
    return gen.standard_normal(), gen.standard_normal(), gen.standard_normal()


@njit
def brownian_fpt_from_gaussian(distance, g):
    return distance * distance / (g * g)


@njit
def brownian_fpt(gen, distance):
    """First hitting time of level ``distance`` by a standard Brownian motion."""
    g = gen.standard_normal()
    while g == 0.0:
        g = gen.standard_normal()
    return brownian_fpt_from_gaussian(distance, g)


@njit
def _std_normal_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit
def gaussian_below(gen, variance, bound):
    """N(0, variance) conditioned to be ``<= bound``."""
    sd = math.sqrt(variance)
    z = bound / sd
    if _std_normal_cdf(z) >= _TAIL_SWITCH:
        while True:
            x = sd * gen.standard_normal()
            if x <= bound:
                return x
    # -X/sd conditioned on >= a with a = -z > 1.64: exponential proposal
    a = -z
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        x = a + exponential(gen, 1.0 / lam)
        if uniform01_open(gen) <= math.exp(-0.5 * (x - lam) * (x - lam)):
            return min(-sd * x, bound)


@njit
def cbm_sample_counted(gen, T, L, max_iter):
    """``B_T`` given that ``B`` stays below ``L`` on ``[0, T]``.

    Returns ``(value, attempts)``; attempts is ``-1`` when ``max_iter`` is
    exhausted.
    """
    sqrt_t = math.sqrt(T)
    scale = T / (2.0 * L)
    for n in range(1, max_iter + 1):
        x = sqrt_t * gen.standard_normal()
        u = uniform01_open(gen)
        if x <= L and -scale * math.log(u) <= L - x:
            return x, n
    return math.nan, -1


@njit
def brownian_bridge_increment(gen, current, endpoint, remaining, step):
    """Position ``step`` later on a Brownian bridge ending at ``endpoint`` after ``remaining``."""
    if step >= remaining:
        return endpoint
    return brownian_bridge_step(current, endpoint, remaining, step, gen.standard_normal())


@njit
def brownian_bridge_step(current, endpoint, remaining, step, g):
    if step >= remaining:
        return endpoint
    return (current + step * (endpoint - current) / remaining
            + math.sqrt(step * (remaining - step) / remaining) * g)


@njit
def bessel3_bridge_point(gen, duration, endpoint_distance, t_prev, t_next, delta, level):
    """Advance the 3-d bridge ``delta`` (updated in place) and return the path position.

    The position ``level - |(1 - t/duration) d e1 + delta|`` starts at
    ``level - d`` and reaches ``level`` at ``t = duration``.
    """
    rem = duration - t_prev
    shrink = (duration - t_next) / rem
    sd = math.sqrt(max((t_next - t_prev) * (duration - t_next) / rem, 0.0))
    delta[0] = shrink * delta[0] + sd * gen.standard_normal()
    delta[1] = shrink * delta[1] + sd * gen.standard_normal()
    delta[2] = shrink * delta[2] + sd * gen.standard_normal()
    x = (duration - t_next) / duration * endpoint_distance + delta[0]
    return level - math.sqrt(x * x + delta[1] * delta[1] + delta[2] * delta[2])


__all__ = [
    "RngStream", "std_gaussian", "uniform", "uniform01_open", "exponential", "gaussian3",
    "brownian_fpt", "brownian_fpt_from_gaussian", "gaussian_below", "cbm_sample_counted",
    "brownian_bridge_increment", "brownian_bridge_step", "bessel3_bridge_point",
]
