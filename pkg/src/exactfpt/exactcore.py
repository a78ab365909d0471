"""Exact samplers for the continuous diffusion ``dY = alpha(t, Y) dt + dB``.

* BR1 and BR2 draw the endpoint ``Y_T``.
* HZ draws the first-passage time through the level.
* CD draws ``Y_T`` conditioned on no passage before ``T``.
* SD combines HZ and CD into the stopped couple ``(tau ^ T, Y_{tau ^ T})``.

All of them are rejection samplers and introduce no discretisation error.
Compiled kernels receive the model functions as arguments and report
through an int64 ``stats`` array.  Wrappers turn a nonzero status into a
:class:`SamplerDiagnostic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from ._jit import NJIT_OPTS
from .model import DriftSpec, FptProblem
from .randkit import (RngStream, bessel3_bridge_point, brownian_bridge_increment,
                      brownian_fpt, cbm_sample_counted, exponential, uniform01_open)

njit = numba.njit(**NJIT_OPTS)

# stats slots
DRAWS, HZ_PROP, HZ_ACC, CD_PROP, CD_ACC, BR_PROP, BR_ACC, STATUS, VIOLATIONS, \
    CBM_ATTEMPTS, CBM_ACC, SAMPLE_DRAWS, CD_LOCAL_REJECT, N_STATS = range(14)
# limits slots
MAX_DRAWS, MAX_SEGMENTS, MAX_CBM, N_LIMITS = range(4)

ST_OK = 0
ST_DRAW_CAP = 1
ST_SEGMENT_CAP = 2
ST_CBM_CAP = 3
ST_ENVELOPE = 4
ST_GAMMA_DOMAIN = 5
ST_NONFINITE = 6

STATUS_TEXT = {
    ST_DRAW_CAP: "primitive draw cap exceeded for one sample (suspected infinite passage time "
                 "or vanishing acceptance rate)",
    ST_SEGMENT_CAP: "jump segment cap exceeded",
    ST_CBM_CAP: "conditioned Brownian endpoint sampler hit its iteration cap",
    ST_ENVELOPE: "BR2 envelope violated: beta(T, y0 + x) - slope*x exceeded the declared bound",
    ST_GAMMA_DOMAIN: "gamma evaluated above the level (internal error)",
    ST_NONFINITE: "a model function returned a non-finite value",
}

DEFAULT_MAX_DRAWS = 10**8
DEFAULT_MAX_SEGMENTS = 10**6
DEFAULT_MAX_CBM = 10**6

_GAMMA_SLACK = 1e-12


class SamplerDiagnostic(RuntimeError):
    """A sampler stopped without a valid outcome; carries telemetry."""

    def __init__(self, status: int, telemetry: "Telemetry", detail: str = ""):
        self.status = status
        self.telemetry = telemetry
        msg = STATUS_TEXT.get(status, f"status {status}")
        if detail:
            msg += f" ({detail})"
        super().__init__(msg + "; " + telemetry.describe())


class EnvelopeViolation(SamplerDiagnostic, ValueError):
    """The declared BR2 envelope bound is wrong for this model."""


@dataclass
class Telemetry:
    draws: int = 0
    hz_proposals: int = 0
    hz_accepted: int = 0
    cd_proposals: int = 0
    cd_accepted: int = 0
    br_proposals: int = 0
    br_accepted: int = 0
    bound_violations: int = 0
    cbm_attempts: int = 0
    cbm_accepted: int = 0
    cd_local_rejections: int = 0

    @classmethod
    def from_stats(cls, st: np.ndarray) -> "Telemetry":
        return cls(int(st[DRAWS]), int(st[HZ_PROP]), int(st[HZ_ACC]), int(st[CD_PROP]),
                   int(st[CD_ACC]), int(st[BR_PROP]), int(st[BR_ACC]), int(st[VIOLATIONS]),
                   int(st[CBM_ATTEMPTS]), int(st[CBM_ACC]), int(st[CD_LOCAL_REJECT]))

    def merge(self, other: "Telemetry") -> "Telemetry":
        return Telemetry(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in self.__dataclass_fields__)

    def acceptance_rates(self) -> dict[str, float | None]:
        def rate(a, p):
            return a / p if p else None
        return {"hz": rate(self.hz_accepted, self.hz_proposals),
                "cd": rate(self.cd_accepted, self.cd_proposals),
                "br": rate(self.br_accepted, self.br_proposals),
                "cbm": rate(self.cbm_accepted, self.cbm_attempts)}

    def as_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["acceptance_rates"] = self.acceptance_rates()
        return d

    def describe(self) -> str:
        rates = ", ".join(f"{k}={v:.4g}" for k, v in self.acceptance_rates().items() if v is not None)
        return (f"draws={self.draws}, bound_violations={self.bound_violations}"
                + (f", acceptance {rates}" if rates else ""))


def new_stats() -> np.ndarray:
    return np.zeros(N_STATS, dtype=np.int64)


def make_limits(max_draws: int | None = None, max_segments: int | None = None,
                max_cbm: int | None = None) -> np.ndarray:
    lim = np.empty(N_LIMITS, dtype=np.int64)
    lim[MAX_DRAWS] = DEFAULT_MAX_DRAWS if max_draws is None else int(max_draws)
    lim[MAX_SEGMENTS] = DEFAULT_MAX_SEGMENTS if max_segments is None else int(max_segments)
    lim[MAX_CBM] = DEFAULT_MAX_CBM if max_cbm is None else int(max_cbm)
    return lim


# ---------------------------------------------------------------------------
# compiled kernels


@njit
def _charge(st, n):
    st[DRAWS] += n
    st[SAMPLE_DRAWS] += n


@njit
def _over_cap(st, lim):
    if st[SAMPLE_DRAWS] > lim[MAX_DRAWS]:
        st[STATUS] = ST_DRAW_CAP
        return True
    return False


@njit
def _gamma_checked(gamma, t, y, anchor, kappa, st):
    g = gamma(t, y, anchor)
    if not math.isfinite(g):
        st[STATUS] = ST_NONFINITE
    elif g < -_GAMMA_SLACK or g > kappa + _GAMMA_SLACK:
        st[VIOLATIONS] += 1
    return g


@njit
def _cbm(gen, T, L, st, lim):
    x, n = cbm_sample_counted(gen, T, L, lim[MAX_CBM])
    if n < 0:
        st[STATUS] = ST_CBM_CAP
        n = lim[MAX_CBM]
    else:
        st[CBM_ACC] += 1
    st[CBM_ATTEMPTS] += n
    _charge(st, 2 * n)
    return x


@njit
def br1_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, y0, T, st, lim, record):
    """Endpoint of the diffusion at ``T`` started from ``y0`` at time 0.

    When ``record`` is set the accepted skeleton is returned as two arrays.
    """
    cap = 16
    sk_t = np.empty(cap)
    sk_y = np.empty(cap)
    while True:
        if _over_cap(st, lim):
            return math.nan, sk_t[:0], sk_y[:0]
        st[BR_PROP] += 1
        tt = 0.0
        z = y0
        n = 0
        if record:
            sk_t[0] = 0.0
            sk_y[0] = y0
            n = 1
        rejected = False
        while True:
            if gamma_zero:
                e = T - tt
            else:
                e = exponential(gen, 1.0 / kappa)
                _charge(st, 1)
            if tt + e >= T:
                z += math.sqrt(T - tt) * gen.standard_normal()
                tt = T
                _charge(st, 1)
            else:
                z += math.sqrt(e) * gen.standard_normal()
                tt += e
                u = uniform01_open(gen)
                _charge(st, 2)
                g = _gamma_checked(gamma, tt, z, anchor, kappa, st)
                if st[STATUS] != 0:
                    return math.nan, sk_t[:0], sk_y[:0]
                if kappa * u < g:
                    rejected = True
            if record:
                if n == cap:
                    cap *= 2
                    nt = np.empty(cap)
                    ny = np.empty(cap)
                    nt[:n] = sk_t[:n]
                    ny[:n] = sk_y[:n]
                    sk_t = nt
                    sk_y = ny
                sk_t[n] = tt
                sk_y[n] = z
                n += 1
            if rejected or tt >= T:
                break
            if _over_cap(st, lim):
                return math.nan, sk_t[:0], sk_y[:0]
        if rejected:
            continue
        b = beta(T, z, anchor)
        if not math.isfinite(b):
            st[STATUS] = ST_NONFINITE
            return math.nan, sk_t[:0], sk_y[:0]
        if b > beta_plus + _GAMMA_SLACK:
            st[VIOLATIONS] += 1
        u = uniform01_open(gen)
        _charge(st, 1)
        if u * math.exp(beta_plus) <= math.exp(b):
            st[BR_ACC] += 1
            return z, sk_t[:n], sk_y[:n]


@njit
def br2_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, y0, T, env_bound, env_slope, st, lim):
    sqrt_t = math.sqrt(T)
    while True:
        # endpoint proposal with density proportional to exp(beta(T, y0+x) - x^2/(2T))
        while True:
            if _over_cap(st, lim):
                return math.nan
            r = env_slope * T + sqrt_t * gen.standard_normal()
            u = uniform01_open(gen)
            _charge(st, 2)
            b = beta(T, y0 + r, anchor)
            if not math.isfinite(b):
                st[STATUS] = ST_NONFINITE
                return math.nan
            expo = b - env_slope * r - env_bound
            if expo > 1e-9:
                st[STATUS] = ST_ENVELOPE
                return math.nan
            if u <= math.exp(expo):
                break
        st[BR_PROP] += 1
        w = y0 + r
        if gamma_zero:
            st[BR_ACC] += 1
            return w
        tt = 0.0
        z = y0
        rejected = False
        while True:
            e = exponential(gen, 1.0 / kappa)
            _charge(st, 1)
            if tt + e >= T:
                break
            z = brownian_bridge_increment(gen, z, w, T - tt, e)
            tt += e
            u = uniform01_open(gen)
            _charge(st, 2)
            g = _gamma_checked(gamma, tt, z, anchor, kappa, st)
            if st[STATUS] != 0:
                return math.nan
            if kappa * u < g:
                rejected = True
                break
            if _over_cap(st, lim):
                return math.nan
        if not rejected:
            st[BR_ACC] += 1
            return w


@njit
def hz_kernel(gen, gamma, gamma_zero, anchor, kappa, t0, y, L, st, lim):
    """First-passage time through ``L`` from ``y`` at time ``t0``."""
    d = L - y
    if d <= 0.0:
        return t0
    delta = np.zeros(3)
    while True:
        if _over_cap(st, lim):
            return math.nan
        tk = brownian_fpt(gen, d)
        _charge(st, 1)
        st[HZ_PROP] += 1
        if gamma_zero:
            st[HZ_ACC] += 1
            return t0 + tk
        delta[0] = 0.0
        delta[1] = 0.0
        delta[2] = 0.0
        e_prev = 0.0
        accepted = True
        while True:
            e = e_prev + exponential(gen, 1.0 / kappa)
            _charge(st, 1)
            if e >= tk:
                break
            pos = bessel3_bridge_point(gen, tk, d, e_prev, e, delta, L)
            v = uniform01_open(gen)
            _charge(st, 4)
            if pos > L:
                st[STATUS] = ST_GAMMA_DOMAIN
                return math.nan
            g = _gamma_checked(gamma, t0 + e, pos, anchor, kappa, st)
            if st[STATUS] != 0:
                return math.nan
            # the first marked arrival rejects the whole proposal
            if kappa * v <= g:
                accepted = False
                break
            e_prev = e
            if _over_cap(st, lim):
                return math.nan
        if accepted:
            st[HZ_ACC] += 1
            return t0 + tk


@njit
def _survives(gen, gap, remaining, st):
    """Accept with the probability that Brownian motion at distance ``gap`` below
    the level stays below it for ``remaining`` time units."""
    u = uniform01_open(gen)
    _charge(st, 1)
    return u <= math.erf(gap / math.sqrt(2.0 * remaining))


@njit
def cd_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, t0, T, y, L, st, lim):
    """``Y_T`` started from ``y`` at ``t0`` conditioned on staying below ``L``."""
    if y > L:
        st[STATUS] = ST_GAMMA_DOMAIN
        return math.nan
    while True:
        if _over_cap(st, lim):
            return math.nan
        st[CD_PROP] += 1
        tt = t0
        cur = y
        rejected = False
        if not gamma_zero:
            while True:
                e = exponential(gen, 1.0 / kappa)
                _charge(st, 1)
                if tt + e >= T:
                    break
                # increment over [tt, tt+e] staying below the level, weighted
                # by the chance of also surviving the rest of [tt, T]
                while True:
                    z = _cbm(gen, e, L - cur, st, lim)
                    if st[STATUS] != 0:
                        return math.nan
                    if _survives(gen, L - cur - z, T - tt - e, st):
                        break
                    st[CD_LOCAL_REJECT] += 1
                    if _over_cap(st, lim):
                        return math.nan
                cur += z
                tt += e
                u = uniform01_open(gen)
                _charge(st, 1)
                g = _gamma_checked(gamma, tt, cur, anchor, kappa, st)
                if st[STATUS] != 0:
                    return math.nan
                if u <= g / kappa:
                    rejected = True
                    break
                if _over_cap(st, lim):
                    return math.nan
            if rejected:
                continue
        cur += _cbm(gen, T - tt, L - cur, st, lim)
        if st[STATUS] != 0:
            return math.nan
        b = beta(T, cur, anchor)
        if not math.isfinite(b):
            st[STATUS] = ST_NONFINITE
            return math.nan
        if b > beta_plus + _GAMMA_SLACK:
            st[VIOLATIONS] += 1
        u = uniform01_open(gen)
        _charge(st, 1)
        if u <= math.exp(b - beta_plus):
            st[CD_ACC] += 1
            return cur


@njit
def sd_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, t0, T, y, L, st, lim):
    """Returns ``(time, position, hit)``."""
    tau = hz_kernel(gen, gamma, gamma_zero, anchor, kappa, t0, y, L, st, lim)
    if st[STATUS] != 0:
        return math.nan, math.nan, False
    if tau < T:
        return tau, L, True
    z = cd_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, t0, T, y, L, st, lim)
    return T, z, False


# batch drivers: one stream, n samples, per-sample draw cap


@njit
def br1_batch(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, y0, T, n, out, st, lim):
    for i in range(n):
        st[SAMPLE_DRAWS] = 0
        z, _, _ = br1_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, y0, T,
                             st, lim, False)
        if st[STATUS] != 0:
            return i
        out[i] = z
    return n


@njit
def br2_batch(gen, gamma, beta, gamma_zero, anchor, kappa, y0, T, env_bound, env_slope, n, out, st, lim):
    for i in range(n):
        st[SAMPLE_DRAWS] = 0
        out[i] = br2_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, y0, T, env_bound,
                            env_slope, st, lim)
        if st[STATUS] != 0:
            return i
    return n


@njit
def hz_batch(gen, gamma, gamma_zero, anchor, kappa, t0, y, L, n, out, st, lim):
    for i in range(n):
        st[SAMPLE_DRAWS] = 0
        out[i] = hz_kernel(gen, gamma, gamma_zero, anchor, kappa, t0, y, L, st, lim)
        if st[STATUS] != 0:
            return i
    return n


@njit
def cd_batch(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, t0, T, y, L, n, out, st, lim):
    for i in range(n):
        st[SAMPLE_DRAWS] = 0
        out[i] = cd_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, t0, T, y, L, st, lim)
        if st[STATUS] != 0:
            return i
    return n


@njit
def sd_batch(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, t0, T, y, L, n,
             out_t, out_y, out_hit, st, lim):
    for i in range(n):
        st[SAMPLE_DRAWS] = 0
        t, z, hit = sd_kernel(gen, gamma, beta, gamma_zero, anchor, kappa, beta_plus, t0, T, y, L, st, lim)
        if st[STATUS] != 0:
            return i
        out_t[i] = t
        out_y[i] = z
        out_hit[i] = hit
    return n


# ---------------------------------------------------------------------------
# Python API


class Skeleton(NamedTuple):
    """Accepted proposal points ``(time, state)``; the first is ``(0, y0)``."""

    times: np.ndarray
    states: np.ndarray


class StoppedCouple(NamedTuple):
    time: float
    position: float
    hit: bool


def _raise_if_bad(st: np.ndarray, detail: str = "") -> None:
    status = int(st[STATUS])
    if status == ST_OK:
        return
    tel = Telemetry.from_stats(st)
    if status == ST_ENVELOPE:
        raise EnvelopeViolation(status, tel, detail)
    raise SamplerDiagnostic(status, tel, detail)


def _limits(max_draws):
    return make_limits(max_draws=max_draws)


def _check_time(T: float, t0: float = 0.0) -> None:
    if not (math.isfinite(T) and T > t0):
        raise ValueError(f"horizon must be finite and greater than {t0}, got {T}")


def br1_endpoint(drift: DriftSpec, y0: float, T: float, s: RngStream, *,
                 max_draws: int | None = None) -> tuple[float, Skeleton]:
    """``Y_T`` by random-walk proposals, thinning and a final ``beta`` test."""
    _check_time(T)
    k = drift.kernels
    st = new_stats()
    z, ts, ys = br1_kernel(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                           drift.beta_plus, float(y0), float(T), st, _limits(max_draws), True)
    _raise_if_bad(st)
    return z, Skeleton(ts.copy(), ys.copy())


def br2_endpoint(drift: DriftSpec, y0: float, T: float, s: RngStream, *, envelope_bound: float,
                 envelope_slope: float = 0.0, max_draws: int | None = None) -> float:
    """``Y_T`` by an endpoint proposal from ``Gamma_T`` and Brownian-bridge thinning.

    ``envelope_bound`` must dominate ``beta(T, y0 + x) - envelope_slope * x``
    for all real ``x``; with slope 0 it is a bound on ``beta(T, .)``.
    """
    _check_time(T)
    k = drift.kernels
    st = new_stats()
    w = br2_kernel(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                   float(y0), float(T), float(envelope_bound), float(envelope_slope), st,
                   _limits(max_draws))
    _raise_if_bad(st)
    return w


def hz_fpt(drift: DriftSpec, problem: FptProblem, s: RngStream, *,
           max_draws: int | None = None) -> float:
    """First-passage time through ``problem.level``, ignoring the horizon.

    Finiteness of the passage time is the caller's responsibility; the draw
    cap turns a non-terminating run into a :class:`SamplerDiagnostic`.
    """
    k = drift.kernels
    st = new_stats()
    t = hz_kernel(s.generator, k.gamma, k.gamma_zero, drift.y_anchor, drift.kappa,
                  float(problem.t0), float(problem.y0), float(problem.level), st, _limits(max_draws))
    _raise_if_bad(st)
    return t


def cd_endpoint(drift: DriftSpec, t0: float, T: float, y: float, L: float, s: RngStream, *,
                max_draws: int | None = None) -> float:
    _check_time(T, t0)
    if not y < L:
        raise ValueError("cd_endpoint needs y < L")
    k = drift.kernels
    st = new_stats()
    z = cd_kernel(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                  drift.beta_plus, float(t0), float(T), float(y), float(L), st, _limits(max_draws))
    _raise_if_bad(st)
    return z


def sd_stopped(drift: DriftSpec, t0: float, T: float, y: float, L: float, s: RngStream, *,
               max_draws: int | None = None) -> StoppedCouple:
    """The couple ``(tau ^ T, Y_{tau ^ T})``; a hit reports position ``L`` exactly."""
    _check_time(T, t0)
    if not y <= L:
        raise ValueError("sd_stopped needs y <= L")
    if y == L:
        return StoppedCouple(float(t0), float(L), True)
    k = drift.kernels
    st = new_stats()
    t, z, hit = sd_kernel(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                          drift.beta_plus, float(t0), float(T), float(y), float(L), st,
                          _limits(max_draws))
    _raise_if_bad(st)
    return StoppedCouple(t, z, bool(hit))


# batch sampling on a single stream


class BatchResult(NamedTuple):
    values: np.ndarray
    telemetry: Telemetry


def sample_br1(drift: DriftSpec, y0: float, T: float, n: int, s: RngStream, *,
               max_draws: int | None = None) -> BatchResult:
    _check_time(T)
    k = drift.kernels
    st = new_stats()
    out = np.empty(n)
    done = br1_batch(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                     drift.beta_plus, float(y0), float(T), n, out, st, _limits(max_draws))
    _raise_if_bad(st, f"after {done} of {n} samples")
    return BatchResult(out, Telemetry.from_stats(st))


def sample_br2(drift: DriftSpec, y0: float, T: float, n: int, s: RngStream, *, envelope_bound: float,
               envelope_slope: float = 0.0, max_draws: int | None = None) -> BatchResult:
    _check_time(T)
    k = drift.kernels
    st = new_stats()
    out = np.empty(n)
    done = br2_batch(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                     float(y0), float(T), float(envelope_bound), float(envelope_slope), n, out, st,
                     _limits(max_draws))
    _raise_if_bad(st, f"after {done} of {n} samples")
    return BatchResult(out, Telemetry.from_stats(st))


def sample_hz(drift: DriftSpec, problem: FptProblem, n: int, s: RngStream, *,
              max_draws: int | None = None) -> BatchResult:
    k = drift.kernels
    st = new_stats()
    out = np.empty(n)
    done = hz_batch(s.generator, k.gamma, k.gamma_zero, drift.y_anchor, drift.kappa,
                    float(problem.t0), float(problem.y0), float(problem.level), n, out, st,
                    _limits(max_draws))
    _raise_if_bad(st, f"after {done} of {n} samples")
    return BatchResult(out, Telemetry.from_stats(st))


def sample_cd(drift: DriftSpec, t0: float, T: float, y: float, L: float, n: int, s: RngStream, *,
              max_draws: int | None = None) -> BatchResult:
    _check_time(T, t0)
    if not y < L:
        raise ValueError("cd needs y < L")
    k = drift.kernels
    st = new_stats()
    out = np.empty(n)
    done = cd_batch(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                    drift.beta_plus, float(t0), float(T), float(y), float(L), n, out, st,
                    _limits(max_draws))
    _raise_if_bad(st, f"after {done} of {n} samples")
    return BatchResult(out, Telemetry.from_stats(st))


def sample_sd(drift: DriftSpec, t0: float, T: float, y: float, L: float, n: int, s: RngStream, *,
              max_draws: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, Telemetry]:
    _check_time(T, t0)
    if not y < L:
        raise ValueError("sd needs y < L")
    k = drift.kernels
    st = new_stats()
    out_t, out_y, out_hit = np.empty(n), np.empty(n), np.empty(n, dtype=np.bool_)
    done = sd_batch(s.generator, k.gamma, k.beta, k.gamma_zero, drift.y_anchor, drift.kappa,
                    drift.beta_plus, float(t0), float(T), float(y), float(L), n,
                    out_t, out_y, out_hit, st, _limits(max_draws))
    _raise_if_bad(st, f"after {done} of {n} samples")
    return out_t, out_y, out_hit, Telemetry.from_stats(st)
