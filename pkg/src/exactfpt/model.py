"""Model description: drift, jumps, first-passage problem and Lamperti reduction.

The samplers work on the reduced form ``dY = alpha(t, Y) dt + dB`` between
jumps.  Rejection weights are expressed through

    beta(t, x)  = integral of alpha(t, .) from the anchor to x
    gamma(t, x) = d(beta)/dt + (d(alpha)/dx + alpha^2) / 2

and the user-declared bounds ``0 <= gamma <= kappa`` and ``beta <= beta_plus``
on the half line below the level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from . import exprlang as ex
from ._jit import QUAD_DEPTH, QUAD_TOL, adaptive_simpson, build_functions


class ModelError(ValueError):
    """Invalid model definition or a model function failing to evaluate."""


class DriftKernels(NamedTuple):
    """Compiled functions handed to the samplers."""

    alpha: Callable  # (t, y)
    gamma: Callable  # (t, y, anchor)
    beta: Callable  # (t, y, anchor)
    gamma_zero: bool


def _src(name: str, args: str, body: str) -> str:
    return f"def {name}({args}):\n" + "".join(f"    {line}\n" for line in body.splitlines())


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Drift ``alpha(t, y)`` of the reduced diffusion with its rejection bounds.

    ``beta`` may be given as an analytic antiderivative in ``y`` ("analytic"
    mode); it is re-anchored so that ``beta(t, y_anchor) == 0``.  Without it
    beta is computed by adaptive Simpson quadrature ("numeric" mode).
    """

    alpha: ex.Expr
    kappa: float
    beta_plus: float
    y_anchor: float = 0.0
    beta_expr: ex.Expr | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", ex.as_expr(self.alpha))
        if self.beta_expr is not None:
            object.__setattr__(self, "beta_expr", ex.as_expr(self.beta_expr))
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ModelError(f"kappa must be a positive finite number, got {self.kappa!r}")
        if not math.isfinite(self.beta_plus):
            raise ModelError(f"beta_plus must be finite, got {self.beta_plus!r}")
        if not math.isfinite(self.y_anchor):
            raise ModelError("y_anchor must be finite")
        used = ex.free_vars(self.alpha) | (ex.free_vars(self.beta_expr) if self.beta_expr else frozenset())
        if "v" in used:
            raise ModelError("drift expressions may only use t and y")

    @property
    def beta_mode(self) -> str:
        return "numeric" if self.beta_expr is None else "analytic"

    @property
    def time_homogeneous(self) -> bool:
        return "t" not in ex.free_vars(self.alpha)

    @cached_property
    def dalpha_dy(self) -> ex.Expr:
        return ex.differentiate(self.alpha, "y")

    @cached_property
    def gamma_space_expr(self) -> ex.Expr:
        """``(d(alpha)/dy + alpha^2) / 2``, the part of gamma without d(beta)/dt."""
        return ex.mul(ex.Const(0.5), ex.add(self.dalpha_dy, ex.mul(self.alpha, self.alpha)))

    def with_anchor(self, y_anchor: float) -> "DriftSpec":
        return DriftSpec(self.alpha, self.kappa, self.beta_plus, y_anchor, self.beta_expr)

    @cached_property
    def kernels(self) -> DriftKernels:
        a = ex.to_python(self.alpha)
        da = ex.to_python(self.dalpha_dy)
        space = f"0.5*(({da}) + ({a})*({a}))"
        sources = {"alpha": _src("alpha", "t, y", f"return {a}")}
        if self.beta_expr is not None:
            b = self.beta_expr
            bt = ex.differentiate(b, "t")
            sources["beta"] = _src(
                "beta", "t, y, anchor",
                f"return ({ex.to_python(b)}) - ({ex.to_python(b, {'y': 'anchor'})})",
            )
            dbdt = f"(({ex.to_python(bt)}) - ({ex.to_python(bt, {'y': 'anchor'})}))"
            if ex._is_const(bt, 0.0):
                dbdt = "0.0"
            sources["gamma"] = _src("gamma", "t, y, anchor", f"return {dbdt} + {space}")
        else:
            sources["beta"] = _src(
                "beta", "t, y, anchor",
                "v, ok = simpson(alpha, t, anchor, y, QUAD_TOL, QUAD_DEPTH)\n"
                "return v if ok else nan",
            )
            if self.time_homogeneous:
                sources["gamma"] = _src("gamma", "t, y, anchor", f"return {space}")
            else:
                # d(beta)/dt as the integral of d(alpha)/dt
                at = ex.to_python(ex.differentiate(self.alpha, "t"))
                sources["alpha_t"] = _src("alpha_t", "t, y", f"return {at}")
                sources["gamma"] = _src(
                    "gamma", "t, y, anchor",
                    "v, ok = simpson(alpha_t, t, anchor, y, QUAD_TOL, QUAD_DEPTH)\n"
                    "if not ok:\n    return nan\n"
                    f"return v + {space}",
                )
        key = ("drift", ex.serialize(self.alpha),
               None if self.beta_expr is None else ex.serialize(self.beta_expr))
        fns = build_functions(key, sources, {})
        gamma_zero = (self.beta_expr is None and self.time_homogeneous
                      and ex._is_const(self.gamma_space_expr, 0.0))
        return DriftKernels(fns["alpha"], fns["gamma"], fns["beta"], gamma_zero)

    # Python-level evaluation -------------------------------------------------

    def alpha_value(self, t: float, y: float) -> float:
        return _checked(self.kernels.alpha(float(t), float(y)), "alpha", t, y)

    def beta(self, t: float, y: float) -> float:
        return _checked(self.kernels.beta(float(t), float(y), self.y_anchor), "beta", t, y)

    def gamma(self, t: float, y: float) -> float:
        return _checked(self.kernels.gamma(float(t), float(y), self.y_anchor), "gamma", t, y)


def _checked(value: float, what: str, t: float, y: float) -> float:
    if not math.isfinite(value):
        raise ModelError(f"{what}(t={t!r}, y={y!r}) did not evaluate to a finite number")
    return value


def beta(spec: DriftSpec, t: float, y: float) -> float:
    """Integral of the drift from ``spec.y_anchor`` to ``y`` at time ``t``."""
    return spec.beta(t, y)


def gamma(spec: DriftSpec, t: float, y: float) -> float:
    return spec.gamma(t, y)


# ---------------------------------------------------------------------------
# jumps and problems

MARK_KINDS = {"none": 0, "exponential": 1, "uniform": 2}


@dataclass(frozen=True, eq=False)
class JumpSpec:
    """Poisson jumps with intensity ``rate`` and displacement ``jump(t, y, v)``.

    ``mark`` is ``"none"`` (no jumps), ``"exponential"`` with params
    ``(rate,)`` or ``"uniform"`` with params ``(a, b)``.
    """

    rate: float = 0.0
    mark: str = "none"
    mark_params: tuple[float, ...] = ()
    jump: ex.Expr = field(default_factory=lambda: ex.Const(0.0))
    _kernel: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "jump", ex.as_expr(self.jump))
        object.__setattr__(self, "mark_params", tuple(float(p) for p in self.mark_params))
        if self.mark not in MARK_KINDS:
            raise ModelError(f"unknown mark distribution {self.mark!r}")
        if self.mark == "exponential":
            if len(self.mark_params) != 1 or not self.mark_params[0] > 0:
                raise ModelError("exponential marks need one positive rate parameter")
        if self.mark == "uniform":
            if len(self.mark_params) != 2 or not self.mark_params[0] < self.mark_params[1]:
                raise ModelError("uniform marks need parameters a < b")
        if self.mark != "none" and not (self.rate > 0 and math.isfinite(self.rate)):
            raise ModelError("jump rate must be positive when marks are present")
        if self.rate < 0:
            raise ModelError("jump rate must be non-negative")

    @classmethod
    def none(cls) -> "JumpSpec":
        return cls()

    @property
    def active(self) -> bool:
        return self.mark != "none" and self.rate > 0

    @property
    def mark_kind(self) -> int:
        return MARK_KINDS[self.mark]

    @property
    def params(self) -> tuple[float, float]:
        p = self.mark_params + (0.0, 0.0)
        return p[0], p[1]

    @cached_property
    def kernel(self) -> Callable:
        if self._kernel is not None:
            return self._kernel
        src = _src("jump", "t, y, v", f"return {ex.to_python(self.jump)}")
        return build_functions(("jump", ex.serialize(self.jump)), {"jump": src}, {})["jump"]

    def jump_value(self, t: float, y: float, v: float) -> float:
        return ex.evaluate(self.jump, t=t, y=y, v=v)


@dataclass(frozen=True)
class FptProblem:
    """First passage through ``level`` starting from ``y0`` at time ``t0``."""

    y0: float
    level: float
    horizon: float = math.inf
    t0: float = 0.0

    def __post_init__(self):
        if not self.y0 <= self.level:
            raise ModelError(f"start y0={self.y0} must lie below the level {self.level}")
        if not self.t0 >= 0:
            raise ModelError("t0 must be non-negative")
        if not self.horizon > self.t0:
            raise ModelError("horizon must exceed t0")

    @property
    def finite_horizon(self) -> bool:
        return math.isfinite(self.horizon)


# ---------------------------------------------------------------------------
# Lamperti reduction


@dataclass(frozen=True, eq=False)
class GeneralSde:
    """Time-homogeneous ``dX = mu(X) dt + sigma(X) dB`` with jumps ``jump``."""

    mu: ex.Expr
    sigma: ex.Expr
    jump: JumpSpec = field(default_factory=JumpSpec)

    def __post_init__(self):
        object.__setattr__(self, "mu", ex.as_expr(self.mu))
        object.__setattr__(self, "sigma", ex.as_expr(self.sigma))
        for e in (self.mu, self.sigma):
            if ex.free_vars(e) - {"y"}:
                raise ModelError("general SDE coefficients may only depend on y")

    @cached_property
    def dsigma_dy(self) -> ex.Expr:
        return ex.differentiate(self.sigma, "y")


@dataclass(frozen=True, eq=False)
class ReducedDrift(DriftSpec):
    """Drift of ``Z = nu(X)`` for a :class:`GeneralSde`; level maps to 0."""

    sde: GeneralSde | None = None
    level: float = 0.0

    @cached_property
    def reduced_alpha(self) -> ex.Expr:
        # alpha(nu(u)) as a function of the original state u
        s, mu, ds = self.sde.sigma, self.sde.mu, self.sde.dsigma_dy
        return ex.sub(ex.div(mu, s), ex.mul(ex.Const(0.5), ds))

    @property
    def time_homogeneous(self) -> bool:
        return True

    @cached_property
    def kernels(self) -> DriftKernels:
        fns = self._functions
        return DriftKernels(fns["alpha"], fns["gamma"], fns["beta"], False)

    @cached_property
    def _functions(self) -> dict:
        sde = self.sde
        h = self.reduced_alpha
        dh = ex.differentiate(h, "y")
        L = repr(float(self.level))
        sources = {
            "sigma": _src("sigma", "t, y", f"return {ex.to_python(sde.sigma)}"),
            "inv_sigma": _src("inv_sigma", "t, y",
                              "s = sigma(t, y)\nif not s > 0.0:\n    return nan\nreturn 1.0 / s"),
            "h": _src("h", "t, y", f"return {ex.to_python(h)}"),
            "dh": _src("dh", "t, y", f"return {ex.to_python(dh)}"),
            "nu": _src("nu", "x",
                       f"v, ok = simpson(inv_sigma, 0.0, {L}, x, QUAD_TOL, QUAD_DEPTH)\n"
                       "return v if ok else nan"),
            "nu_inv": _NU_INV_SRC.replace("LEVEL", L),
            "alpha": _src("alpha", "t, x", "return h(t, nu_inv(x))"),
            "gamma": _src("gamma", "t, x, anchor",
                          "u = nu_inv(x)\nhh = h(t, u)\nreturn 0.5*(sigma(t, u)*dh(t, u) + hh*hh)"),
            "beta_integrand": _src("beta_integrand", "t, u", "return h(t, u) / sigma(t, u)"),
            "beta": _src("beta", "t, x, anchor",
                         "v, ok = simpson(beta_integrand, t, nu_inv(anchor), nu_inv(x), QUAD_TOL, QUAD_DEPTH)\n"
                         "return v if ok else nan"),
        }
        if sde.jump.active:
            sources["ujump"] = _src("ujump", "t, y, v", f"return {ex.to_python(sde.jump.jump)}")
            sources["jump"] = _src("jump", "t, z, v",
                                   "u = nu_inv(z)\nreturn nu(u + ujump(t, u, v)) - z")
        key = ("reduced", ex.serialize(sde.mu), ex.serialize(sde.sigma),
               ex.serialize(sde.jump.jump) if sde.jump.active else None, float(self.level))
        return build_functions(key, sources, {})

    def nu(self, x: float) -> float:
        v = self._functions["nu"](float(x))
        if not math.isfinite(v):
            raise ModelError(f"nu({x!r}) failed: sigma must stay positive between {self.level} and {x}")
        return v

    def nu_inv(self, z: float) -> float:
        u = self._functions["nu_inv"](float(z))
        if not math.isfinite(u):
            raise ModelError(f"nu_inv({z!r}) failed: sigma not positive on the searched range")
        return u


_NU_INV_SRC = """
def nu_inv(z):
    level = LEVEL
    if z == 0.0:
        return level
    direction = 1.0 if z > 0.0 else -1.0
    s0 = sigma(0.0, level)
    if not s0 > 0.0:
        return nan
    lo_u = level
    lo_n = 0.0
    step = s0 * abs(z)
    hi_u = nan
    hi_n = nan
    found = False
    for _ in range(400):
        cand = lo_u + direction * step
        if not sigma(0.0, cand) > 0.0:
            step *= 0.5
            if step < 1e-300:
                return nan
            continue
        piece, ok = simpson(inv_sigma, 0.0, lo_u, cand, QUAD_TOL, QUAD_DEPTH)
        if not ok:
            step *= 0.5
            continue
        n_new = lo_n + piece
        if (n_new - z) * direction >= 0.0:
            hi_u = cand
            hi_n = n_new
            found = True
            break
        lo_u = cand
        lo_n = n_new
        step *= 2.0
    if not found:
        return nan
    x = lo_u
    xn = lo_n
    a = min(lo_u, hi_u)
    b = max(lo_u, hi_u)
    for _ in range(200):
        cand = x + (z - xn) * sigma(0.0, x)
        if not (a < cand < b):
            cand = 0.5 * (a + b)
        piece, ok = simpson(inv_sigma, 0.0, x, cand, QUAD_TOL, QUAD_DEPTH)
        cn = xn + piece
        if cn != cn:
            return nan
        if abs(cn - z) <= 1e-13 * (1.0 + abs(z)) or abs(cand - x) <= 1e-12 * (1.0 + abs(x)):
            return cand
        if (cn - z) * direction < 0.0:
            if direction > 0.0:
                a = cand
            else:
                b = cand
        else:
            if direction > 0.0:
                b = cand
            else:
                a = cand
        x = cand
        xn = cn
    return x
"""


class LampertiReduction(NamedTuple):
    drift: ReducedDrift
    jump: JumpSpec
    nu: Callable[[float], float]
    nu_inv: Callable[[float], float]


def lamperti_reduce(
    g: GeneralSde,
    level: float,
    *,
    kappa: float,
    beta_plus: float,
    y_anchor: float = 0.0,
) -> LampertiReduction:
    """Reduce ``g`` to unit diffusion coefficient with ``nu(x) = int_level^x 1/sigma``.

    The level maps to 0.  ``kappa``, ``beta_plus`` and ``y_anchor`` refer to
    the reduced coordinates and must be supplied by the caller.
    """
    if not ex.evaluate(g.sigma, y=level) > 0:
        raise ModelError(f"sigma must be positive at the level {level}")
    drift = ReducedDrift(ex.Const(0.0), kappa, beta_plus, y_anchor, None, sde=g, level=float(level))
    fns = drift._functions
    if g.jump.active:
        jump = JumpSpec(g.jump.rate, g.jump.mark, g.jump.mark_params, g.jump.jump, _kernel=fns["jump"])
    else:
        jump = JumpSpec()
    return LampertiReduction(drift, jump, drift.nu, drift.nu_inv)


def reduced_problem(red: LampertiReduction, problem: FptProblem) -> FptProblem:
    """Map a problem on the original state to the reduced coordinates."""
    return FptProblem(red.nu(problem.y0), 0.0, problem.horizon, problem.t0)


# ---------------------------------------------------------------------------
# bound validation


@dataclass
class Violation:
    kind: str  # "gamma<0", "gamma>kappa", "beta>beta_plus" or "nonfinite"
    t: float
    y: float
    value: float


@dataclass
class BoundsReport:
    violations: list[Violation]
    n_points: int
    gamma_range: tuple[float, float]
    beta_max: float
    t_range: tuple[float, float]
    y_range: tuple[float, float]

    @property
    def clean(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        head = (f"scanned {self.n_points} points, t in [{self.t_range[0]:g}, {self.t_range[1]:g}],"
                f" y in [{self.y_range[0]:g}, {self.y_range[1]:g}];"
                f" gamma in [{self.gamma_range[0]:.6g}, {self.gamma_range[1]:.6g}],"
                f" max beta {self.beta_max:.6g}")
        if self.clean:
            return head + "; no violations"
        kinds: dict[str, int] = {}
        for v in self.violations:
            kinds[v.kind] = kinds.get(v.kind, 0) + 1
        return head + "; violations: " + ", ".join(f"{k} x{n}" for k, n in sorted(kinds.items()))


def validate_bounds(
    spec: DriftSpec,
    problem: FptProblem,
    grid: tuple[int, int] = (5, 2001),
    *,
    y_low: float | None = None,
    t_scan: float = 10.0,
    atol: float = 1e-9,
) -> BoundsReport:
    """Scan ``0 <= gamma <= kappa`` and ``beta <= beta_plus`` on a grid below the level.

    A clean report is evidence, not proof, that the declared bounds hold.
    """
    n_t, n_y = grid
    L = problem.level
    if y_low is None:
        y_low = problem.y0 - 10.0 * (L - problem.y0)
        if y_low == L:
            y_low = L - 10.0
    t_hi = min(problem.horizon, problem.t0 + t_scan)
    ts = np.linspace(problem.t0, t_hi, n_t) if (n_t > 1 and not spec.time_homogeneous) else np.array([problem.t0])
    ys = np.linspace(y_low, L, n_y)
    k = spec.kernels
    violations = []
    gmin, gmax, bmax = math.inf, -math.inf, -math.inf
    for t in ts:
        for y in ys:
            g = k.gamma(float(t), float(y), spec.y_anchor)
            b = k.beta(float(t), float(y), spec.y_anchor)
            if not (math.isfinite(g) and math.isfinite(b)):
                violations.append(Violation("nonfinite", float(t), float(y), g if not math.isfinite(g) else b))
                continue
            gmin, gmax, bmax = min(gmin, g), max(gmax, g), max(bmax, b)
            if g < -atol:
                violations.append(Violation("gamma<0", float(t), float(y), g))
            if g > spec.kappa + atol:
                violations.append(Violation("gamma>kappa", float(t), float(y), g))
            if b > spec.beta_plus + atol:
                violations.append(Violation("beta>beta_plus", float(t), float(y), b))
    return BoundsReport(violations, len(ts) * len(ys), (gmin, gmax), bmax,
                        (float(ts[0]), float(ts[-1])), (float(y_low), float(L)))


__all__ = [
    "BoundsReport", "DriftKernels", "DriftSpec", "FptProblem", "GeneralSde", "JumpSpec",
    "LampertiReduction", "ModelError", "ReducedDrift", "Violation", "beta", "gamma",
    "lamperti_reduce", "reduced_problem", "validate_bounds", "adaptive_simpson",
    "QUAD_TOL", "QUAD_DEPTH",
]
