"""numba plumbing: code generation for model functions and adaptive quadrature."""

from __future__ import annotations

import itertools
import math
import threading

import numba
import numpy as np

NJIT_OPTS = dict(nogil=True, error_model="numpy")

_counter = itertools.count()
_cache: dict[tuple, object] = {}
_lock = threading.Lock()


@numba.njit(nogil=True, error_model="numpy")
def adaptive_simpson(f, t, a, b, tol, max_depth):
    """Integrate ``f(t, u)`` over ``u`` in ``[a, b]`` by adaptive Simpson.

    Returns ``(value, ok)``.  ``ok`` is False when some subinterval hit
    ``max_depth`` without meeting its share of the tolerance, or when ``f``
    returned a non-finite value (then ``value`` is NaN).
    """
    if a == b:
        return 0.0, True
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    cap = 2 * max_depth + 8
    sa = np.empty(cap)
    sb = np.empty(cap)
    sfa = np.empty(cap)
    sfm = np.empty(cap)
    sfb = np.empty(cap)
    swhole = np.empty(cap)
    stol = np.empty(cap)
    sdepth = np.empty(cap, dtype=np.int64)

    fa = f(t, a)
    fb = f(t, b)
    m = 0.5 * (a + b)
    fm = f(t, m)
    if not (math.isfinite(fa) and math.isfinite(fb) and math.isfinite(fm)):
        return math.nan, False
    top = 0
    sa[0] = a
    sb[0] = b
    sfa[0] = fa
    sfm[0] = fm
    sfb[0] = fb
    swhole[0] = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stol[0] = tol
    sdepth[0] = 0
    top = 1
    total = 0.0
    ok = True
    while top > 0:
        top -= 1
        a = sa[top]
        b = sb[top]
        fa = sfa[top]
        fm = sfm[top]
        fb = sfb[top]
        whole = swhole[top]
        eps = stol[top]
        depth = sdepth[top]
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(t, lm)
        frm = f(t, rm)
        if not (math.isfinite(flm) and math.isfinite(frm)):
            return math.nan, False
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        diff = left + right - whole
        if abs(diff) <= 15.0 * eps or lm <= a or rm >= b:
            total += left + right + diff / 15.0
            continue
        if depth >= max_depth:
            ok = False
            total += left + right + diff / 15.0
            continue
        # push right then left so the left half is processed first
        sa[top] = m
        sb[top] = b
        sfa[top] = fm
        sfm[top] = frm
        sfb[top] = fb
        swhole[top] = right
        stol[top] = 0.5 * eps
        sdepth[top] = depth + 1
        top += 1
        sa[top] = a
        sb[top] = m
        sfa[top] = fa
        sfm[top] = flm
        sfb[top] = fm
        swhole[top] = left
        stol[top] = 0.5 * eps
        sdepth[top] = depth + 1
        top += 1
    return sign * total, ok


QUAD_TOL = 1e-10
QUAD_DEPTH = 40


def build_functions(key: tuple | None, sources: dict[str, str], namespace: dict) -> dict:
    """Exec generated ``def`` sources and jit them.

    ``sources`` maps function name to a complete ``def`` statement.  Later
    entries may call earlier ones.  Results are memoized on ``key``.
    """
    with _lock:
        if key is not None and key in _cache:
            return _cache[key]
        ns = {"math": math, "np": np, "simpson": adaptive_simpson,
              "QUAD_TOL": QUAD_TOL, "QUAD_DEPTH": QUAD_DEPTH, "nan": math.nan}
        ns.update(namespace)
        out = {}
        tag = next(_counter)
        for name, src in sources.items():
            code = compile(src, f"<exactfpt-generated-{tag}-{name}>", "exec")
            exec(code, ns)
            ns[name] = numba.njit(**NJIT_OPTS)(ns[name])
            out[name] = ns[name]
        if key is not None:
            _cache[key] = out
        return out
