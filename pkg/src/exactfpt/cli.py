"""``fpt`` command line: run experiments from INI files, compare samples, scan bounds.

A config has the sections ``[model]``, ``[jumps]``, ``[problem]``, ``[run]``
and ``[output]``; see the README for the keys.  Samples are drawn in blocks
of ``block_size``; block ``b`` uses stream id ``b``.  The output therefore
does not depend on the worker count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import exprlang as ex
from . import oracle
from .exactcore import (SamplerDiagnostic, Telemetry, sample_br1, sample_br2, sample_cd,
                        sample_hz, sample_sd)
from .jumpfpt import sample_jump_fpt
from .model import (DriftSpec, FptProblem, GeneralSde, JumpSpec, ModelError, lamperti_reduce,
                    validate_bounds)
from .randkit import RngStream

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIAGNOSTIC, EXIT_IO, EXIT_VIOLATIONS = 0, 1, 2, 3, 4, 5

ALGORITHMS = ("br1", "br2", "hz", "cd", "sd", "sjd", "jd", "euler", "euler_endpoint")
ENDPOINT_ALGORITHMS = ("br1", "br2", "cd", "euler_endpoint")
ORACLES = ("bm_fpt", "inverse_gaussian", "cbm", "normal")

KIND_LABELS = ("diffusion-hit", "jump-hit", "horizon-capped", "censored", "endpoint")
K_ENDPOINT = 4

SAMPLE_HEADER = ["stream_id", "draw_index", "time", "position", "kind", "jumps_consumed", "segments"]


class ConfigError(ValueError):
    pass


class ConfigReadError(ConfigError):
    """The config file itself could not be read (an I/O failure, exit 4)."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    text: str
    drift: DriftSpec
    jumps: JumpSpec
    problem: FptProblem
    algorithm: str
    sample_count: int
    seed: int
    worker_count: int = 1
    block_size: int = 1000
    max_draws: int | None = None
    max_segments: int | None = None
    envelope_bound: float | None = None
    envelope_slope: float = 0.0
    euler_step: float = 1e-4
    euler_t_max: float = 100.0
    out_dir: Path = Path("fpt_out")
    histogram_bins: int = 50
    histogram_range: tuple[float, float] | None = None
    tolerance: float | None = None
    general: GeneralSde | None = None
    # state maps when the model was given as a general SDE
    to_reduced: Callable[[float], float] | None = field(default=None, repr=False)
    from_reduced: Callable[[float], float] | None = field(default=None, repr=False)

    @property
    def experiment_kind(self) -> str:
        return "endpoint" if self.algorithm in ENDPOINT_ALGORITHMS else "fpt"

    @property
    def config_hash(self) -> str:
        """Hash of the recorded config without ``worker_count``, which cannot change samples."""
        kept = [ln for ln in self.text.splitlines() if not re.match(r"\s*worker_count\s*[=:]", ln)]
        return hashlib.sha256("\n".join(kept).encode()).hexdigest()


def _get(cp, section, key, conv=str, default=...):
    if cp.has_option(section, key):
        raw = cp.get(section, key).strip()
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
            raw = raw[1:-1]
        try:
            return conv(raw)
        except (ValueError, ex.ExprError) as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    if default is ...:
        raise ConfigError(f"missing [{section}] {key}")
    return default


def _float(s: str) -> float:
    if s.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return float(s)


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _int(s: str) -> int:
    f = float(s)
    if not f.is_integer():
        raise ValueError("expected an integer")
    return int(f)


_MARK_RE = re.compile(r"^\s*(none|exponential|uniform)\s*(?:\(([^)]*)\))?\s*$")


def _marks(s: str) -> tuple[str, tuple[float, ...]]:
    m = _MARK_RE.match(s)
    if not m:
        raise ValueError("expected none, exponential(rate) or uniform(a, b)")
    args = tuple(float(a) for a in m.group(2).split(",")) if m.group(2) else ()
    return m.group(1), args


def _expr(text: str) -> ex.Expr:
    return ex.parse(text)


def _range(s: str) -> tuple[float, float]:
    parts = [float(p) for p in s.split(",")]
    if len(parts) != 2 or not parts[0] < parts[1]:
        raise ValueError("expected lo, hi with lo < hi")
    return parts[0], parts[1]


def load_config(path: str | os.PathLike, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigReadError(f"cannot read config {path}: {exc}") from None
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not cp.has_section("run"):
        raise ConfigError("missing [run] section")
    for key, value in (overrides or {}).items():
        if value is not None:
            cp.set("run", key, str(value))
    # the effective config is what gets recorded
    buf = io.StringIO()
    cp.write(buf)
    return build_config(cp, buf.getvalue())


def build_config(cp: configparser.ConfigParser, text: str) -> ExperimentConfig:
    try:
        return _build(cp, text)
    except (ModelError, ex.ExprError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _build(cp, text) -> ExperimentConfig:
    for sec in ("model", "problem"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing [{sec}] section")
    algorithm = _get(cp, "run", "algorithm").lower()
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    y0 = _get(cp, "problem", "y0", _float)
    level = _get(cp, "problem", "level", _float)
    horizon = _get(cp, "problem", "horizon", _float, math.inf)
    t0 = _get(cp, "problem", "t0", _float, 0.0)
    ack = _get(cp, "problem", "acknowledge_finiteness", _bool, False)
    problem = FptProblem(y0, level, horizon, t0)

    if cp.has_section("jumps"):
        rate = _get(cp, "jumps", "lambda", _float, 0.0)
        mark, params = _get(cp, "jumps", "marks", _marks, ("none", ()))
        jexpr = _get(cp, "jumps", "jump", _expr, ex.Const(0.0))
        jumps = JumpSpec(rate if mark != "none" else 0.0, mark, params, jexpr)
    else:
        jumps = JumpSpec()

    kappa = _get(cp, "model", "kappa", _float)
    beta_plus = _get(cp, "model", "beta_plus", _float)
    general = None
    to_red = from_red = None
    if cp.has_option("model", "sigma"):
        if cp.has_option("model", "drift"):
            raise ConfigError("[model] takes either drift or mu/sigma, not both")
        general = GeneralSde(_get(cp, "model", "mu", _expr), _get(cp, "model", "sigma", _expr), jumps)
        red = lamperti_reduce(general, level, kappa=kappa, beta_plus=beta_plus,
                              y_anchor=_get(cp, "model", "y_anchor", _float, 0.0))
        drift, jumps = red.drift, red.jump if jumps.active else JumpSpec()
        to_red, from_red = red.nu, red.nu_inv
    else:
        drift = DriftSpec(_get(cp, "model", "drift", _expr), kappa, beta_plus,
                          _get(cp, "model", "y_anchor", _float, y0),
                          _get(cp, "model", "beta", _expr, None))

    if cp.has_section("output"):
        out_dir = Path(_get(cp, "output", "dir", str, "fpt_out"))
        bins = _get(cp, "output", "histogram_bins", _int, 50)
        hrange = _get(cp, "output", "histogram_range", _range, None)
    else:
        out_dir, bins, hrange = Path("fpt_out"), 50, None

    cfg = ExperimentConfig(
        text=text, drift=drift, jumps=jumps, problem=problem, algorithm=algorithm,
        sample_count=_get(cp, "run", "sample_count", _int),
        seed=_get(cp, "run", "seed", _int),
        worker_count=_get(cp, "run", "worker_count", _int, 1),
        block_size=_get(cp, "run", "block_size", _int, 1000),
        max_draws=_get(cp, "run", "max_draws", _int, None),
        max_segments=_get(cp, "run", "max_segments", _int, None),
        envelope_bound=_get(cp, "model", "envelope_bound", _float, None),
        envelope_slope=_get(cp, "model", "envelope_slope", _float, 0.0),
        euler_step=_get(cp, "run", "euler_step", _float, 1e-4),
        euler_t_max=_get(cp, "run", "euler_t_max", _float, 100.0),
        out_dir=out_dir, histogram_bins=bins, histogram_range=hrange,
        tolerance=_get(cp, "compare", "tolerance", _float, None) if cp.has_section("compare") else None,
        general=general, to_reduced=to_red, from_reduced=from_red,
    )
    env_cap = os.environ.get("FPT_MAX_DRAWS")
    if env_cap:
        try:
            cfg.max_draws = _int(env_cap)
        except ValueError:
            raise ConfigError(f"FPT_MAX_DRAWS={env_cap!r} is not an integer") from None
    _check(cfg, ack)
    return cfg


def _check(cfg: ExperimentConfig, ack: bool) -> None:
    a, p = cfg.algorithm, cfg.problem
    if cfg.sample_count < 0:
        raise ConfigError("sample_count must be >= 0")
    if cfg.worker_count < 1 or cfg.block_size < 1:
        raise ConfigError("worker_count and block_size must be >= 1")
    if a == "sjd" and not p.finite_horizon:
        cfg.algorithm = a = "jd"
    if a in ("br1", "br2", "cd", "sd", "sjd", "euler_endpoint") and not p.finite_horizon:
        raise ConfigError(f"algorithm {a} needs a finite horizon")
    if a in ("hz", "jd") and p.finite_horizon:
        raise ConfigError(f"algorithm {a} has no horizon; set horizon = inf (or use sd / sjd)")
    if not p.finite_horizon and not ack:
        raise ConfigError("an infinite horizon needs acknowledge_finiteness = true: the passage time "
                          "must be finite almost surely for this model")
    if a in ("br1", "br2") and p.t0 != 0:
        raise ConfigError(f"{a} starts at time 0; t0 must be 0")
    if a == "br2" and cfg.envelope_bound is None:
        raise ConfigError("br2 needs [model] envelope_bound")
    if a == "cd" and not p.y0 < p.level:
        raise ConfigError("cd needs y0 < level")
    if cfg.jumps.active and a not in ("sjd", "jd", "euler"):
        raise ConfigError(f"algorithm {a} ignores jumps; use sjd, jd or euler")
    if cfg.general is not None and a in ("br1", "br2", "euler_endpoint"):
        raise ConfigError(f"algorithm {a} is not available for a general (mu, sigma) model")
    if not cfg.euler_step > 0:
        raise ConfigError("euler_step must be positive")


# ---------------------------------------------------------------------------
# sampling


@dataclass
class Block:
    stream_id: int
    time: np.ndarray
    position: np.ndarray
    kind: np.ndarray
    jumps: np.ndarray
    segments: np.ndarray
    telemetry: Telemetry


def _reduced_problem(cfg: ExperimentConfig) -> FptProblem:
    p = cfg.problem
    if cfg.to_reduced is None:
        return p
    return FptProblem(cfg.to_reduced(p.y0), 0.0, p.horizon, p.t0)


def sample_block(cfg: ExperimentConfig, stream_id: int, n: int) -> Block:
    s = RngStream(cfg.seed, stream_id)
    a = cfg.algorithm
    p = cfg.problem
    rp = _reduced_problem(cfg)
    d = cfg.drift
    caps = {"max_draws": cfg.max_draws}
    zeros = np.zeros(n, dtype=np.int64)
    ones = np.ones(n, dtype=np.int64)
    endpoint = np.full(n, K_ENDPOINT, dtype=np.int64)
    horizon = np.full(n, p.horizon)
    if a == "br1":
        r = sample_br1(d, p.y0, p.horizon, n, s, **caps)
        return Block(stream_id, horizon, r.values, endpoint, zeros, zeros, r.telemetry)
    if a == "br2":
        r = sample_br2(d, p.y0, p.horizon, n, s, envelope_bound=cfg.envelope_bound,
                       envelope_slope=cfg.envelope_slope, **caps)
        return Block(stream_id, horizon, r.values, endpoint, zeros, zeros, r.telemetry)
    if a == "cd":
        r = sample_cd(d, rp.t0, rp.horizon, rp.y0, rp.level, n, s, **caps)
        pos = _back(cfg, r.values)
        return Block(stream_id, horizon, pos, endpoint, zeros, ones, r.telemetry)
    if a == "hz":
        r = sample_hz(d, rp, n, s, **caps)
        return Block(stream_id, r.values, np.full(n, p.level), zeros, zeros, ones, r.telemetry)
    if a == "sd":
        t, y, hit, tel = sample_sd(d, rp.t0, rp.horizon, rp.y0, rp.level, n, s, **caps)
        kind = np.where(hit, 0, 2).astype(np.int64)
        pos = np.where(hit, p.level, _back(cfg, y))
        return Block(stream_id, t, pos, kind, zeros, ones, tel)
    if a in ("sjd", "jd"):
        b = sample_jump_fpt(d, cfg.jumps, rp, n, s, max_segments=cfg.max_segments, **caps)
        pos = np.where(b.kind == 0, p.level, _back(cfg, b.position))
        return Block(stream_id, b.time, pos, b.kind, b.jumps_consumed, b.segment_count, b.telemetry)
    if a == "euler":
        model = cfg.general if cfg.general is not None else d
        jumps = cfg.general.jump if cfg.general is not None else cfg.jumps
        b = oracle.euler_fpt(model, jumps, p, cfg.euler_step, n, s, t_max=cfg.euler_t_max)
        return Block(stream_id, b.time, b.position, b.kind, b.jumps_consumed, b.segment_count, b.telemetry)
    if a == "euler_endpoint":
        v = oracle.euler_endpoint(d, p.y0, p.horizon, cfg.euler_step, n, s, t0=p.t0)
        return Block(stream_id, horizon, v, endpoint, zeros, zeros, Telemetry())
    raise ConfigError(f"unknown algorithm {a}")


def _back(cfg: ExperimentConfig, z: np.ndarray) -> np.ndarray:
    if cfg.from_reduced is None:
        return z
    return np.array([cfg.from_reduced(v) for v in z]) if len(z) else z


class RunFailure(Exception):
    def __init__(self, diagnostic: SamplerDiagnostic, blocks: list[Block]):
        self.diagnostic = diagnostic
        self.blocks = blocks
        super().__init__(str(diagnostic))


def sample_all(cfg: ExperimentConfig) -> list[Block]:
    """Draw ``cfg.sample_count`` samples; blocks come back in stream order."""
    n, bs = cfg.sample_count, cfg.block_size
    sizes = [min(bs, n - i) for i in range(0, n, bs)]
    # compile in the calling thread before fanning out
    sample_block(cfg, 0, 0)
    results: list[Block | SamplerDiagnostic] = [None] * len(sizes)

    def work(b):
        try:
            results[b] = sample_block(cfg, b, sizes[b])
        except SamplerDiagnostic as exc:
            results[b] = exc

    if cfg.worker_count == 1 or len(sizes) <= 1:
        for b in range(len(sizes)):
            work(b)
            if isinstance(results[b], SamplerDiagnostic):
                break
    else:
        with ThreadPoolExecutor(cfg.worker_count) as pool:
            list(pool.map(work, range(len(sizes))))
    done = []
    for r in results:
        if isinstance(r, SamplerDiagnostic):
            raise RunFailure(r, done)
        if r is None:
            break
        done.append(r)
    return done


# ---------------------------------------------------------------------------
# artifacts


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _header_comment(cfg: ExperimentConfig) -> str:
    return f"# config_sha256={cfg.config_hash} seed={cfg.seed}\n"


def write_samples(path: Path, cfg: ExperimentConfig, blocks: list[Block]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header_comment(cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_HEADER)
        for b in blocks:
            for i in range(len(b.time)):
                w.writerow([b.stream_id, i, _fmt(b.time[i]), _fmt(b.position[i]),
                            KIND_LABELS[b.kind[i]], int(b.jumps[i]), int(b.segments[i])])


def read_samples(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path) as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    head, body = rows[0], rows[1:]
    cols = {h: [r[i] for r in body] for i, h in enumerate(head)}
    out = {k: np.array(cols[k], dtype=float) for k in ("time", "position")}
    out["kind"] = np.array(cols["kind"], dtype=object)
    for k in ("stream_id", "draw_index", "jumps_consumed", "segments"):
        out[k] = np.array(cols[k], dtype=np.int64)
    return out


def _values_for(cfg: ExperimentConfig, blocks: list[Block]) -> np.ndarray:
    col = "position" if cfg.experiment_kind == "endpoint" else "time"
    parts = [getattr(b, col) for b in blocks]
    return np.concatenate(parts) if parts else np.empty(0)


def summarize(cfg: ExperimentConfig, blocks: list[Block], wall: float,
              diagnostic: SamplerDiagnostic | None = None) -> dict:
    tel = Telemetry()
    for b in blocks:
        tel = tel.merge(b.telemetry)
    if diagnostic is not None:
        tel = tel.merge(diagnostic.telemetry)
    kinds = np.concatenate([b.kind for b in blocks]) if blocks else np.empty(0, dtype=np.int64)
    counts = {lab: int((kinds == i).sum()) for i, lab in enumerate(KIND_LABELS)}
    values = _values_for(cfg, blocks)
    finite = values[np.isfinite(values)]
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    stat_name = "position" if cfg.experiment_kind == "endpoint" else "time"
    stats = {"count": int(finite.size),
             "mean": float(finite.mean()) if finite.size else None,
             "std": float(finite.std(ddof=1)) if finite.size > 1 else None,
             "quantiles": {str(q): float(np.quantile(finite, q)) for q in qs} if finite.size else {}}
    out = {
        "algorithm": cfg.algorithm,
        "experiment_kind": cfg.experiment_kind,
        "sample_count": int(sum(len(b.time) for b in blocks)),
        "requested_sample_count": cfg.sample_count,
        "seed": cfg.seed,
        "worker_count": cfg.worker_count,
        "block_size": cfg.block_size,
        "config_sha256": cfg.config_hash,
        "config": cfg.text,
        "kind_counts": counts,
        stat_name: stats,
        "telemetry": tel.as_dict(),
        "wall_time_s": round(wall, 3),
    }
    if diagnostic is not None:
        out["diagnostic"] = {"message": str(diagnostic), "status": diagnostic.status}
    return out


def write_histogram(path: Path, cfg: ExperimentConfig, blocks: list[Block]) -> None:
    v = _values_for(cfg, blocks)
    v = v[np.isfinite(v)]
    rng = cfg.histogram_range
    if rng is None:
        rng = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
        if rng[0] == rng[1]:
            rng = (rng[0] - 0.5, rng[1] + 0.5)
    edges, counts = oracle.histogram(v, cfg.histogram_bins, rng)
    with open(path, "w", newline="") as fh:
        fh.write(_header_comment(cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([_fmt(lo), _fmt(hi), int(c)])


def run(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {cfg.out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO
    start = time.perf_counter()
    diagnostic = None
    try:
        blocks = sample_all(cfg)
    except RunFailure as exc:
        blocks, diagnostic = exc.blocks, exc.diagnostic
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    wall = time.perf_counter() - start
    summary = summarize(cfg, blocks, wall, diagnostic)
    try:
        write_samples(cfg.out_dir / "samples.csv", cfg, blocks)
        write_histogram(cfg.out_dir / "histogram.csv", cfg, blocks)
        with open(cfg.out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: writing artifacts failed: {exc}", file=sys.stderr)
        return EXIT_IO
    if diagnostic is not None:
        print(f"diagnostic: {diagnostic}", file=sys.stderr)
        print(f"partial results ({summary['sample_count']} samples) written to {cfg.out_dir}",
              file=sys.stderr)
        return EXIT_DIAGNOSTIC
    print(json.dumps({k: summary[k] for k in ("algorithm", "sample_count", "kind_counts",
                                              "wall_time_s")}), file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare and validate


def oracle_cdf(cfg: ExperimentConfig, name: str) -> Callable:
    p = cfg.problem
    d = p.level - p.y0
    if cfg.general is not None:
        raise ConfigError("analytic oracles assume a unit-diffusion model")
    alpha = cfg.drift.alpha
    if name == "bm_fpt":
        _require_kind(cfg, "fpt", name)
        return lambda t: oracle.bm_fpt_cdf(np.asarray(t, dtype=float) - p.t0, d)
    if name == "inverse_gaussian":
        _require_kind(cfg, "fpt", name)
        if not isinstance(alpha, ex.Const) or not alpha.value > 0:
            raise ConfigError("inverse_gaussian oracle needs a positive constant drift")
        mu = alpha.value
        return lambda t: oracle.inverse_gaussian_cdf(np.asarray(t, dtype=float) - p.t0, d / mu, d * d)
    if name == "cbm":
        _require_kind(cfg, "endpoint", name)
        T = p.horizon - p.t0
        return lambda x: oracle.cbm_cdf(T, d, np.minimum(np.asarray(x, dtype=float) - p.y0, d))
    if name == "normal":
        _require_kind(cfg, "endpoint", name)
        mu = alpha.value if isinstance(alpha, ex.Const) else None
        if mu is None:
            raise ConfigError("normal oracle needs a constant drift")
        T = p.horizon - p.t0
        return oracle.normal_cdf(p.y0 + mu * T, T)
    raise ConfigError(f"unknown oracle {name!r}; choose from {', '.join(ORACLES)}")


def _censoring_time(cfg: ExperimentConfig) -> float:
    if cfg.algorithm == "euler" and not cfg.problem.finite_horizon:
        return cfg.problem.t0 + cfg.euler_t_max
    return math.inf


def _require_kind(cfg, kind, name):
    if cfg.experiment_kind != kind:
        raise ConfigError(f"oracle {name} applies to {kind} experiments, not {cfg.experiment_kind}")


def compare(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig | None, oracle_name: str | None,
            tolerance: float | None = None, safety: float = 1.5) -> dict:
    a = _values_for(cfg_a, sample_all(cfg_a))
    if cfg_b is not None:
        if cfg_b.experiment_kind != cfg_a.experiment_kind:
            raise ConfigError(f"mismatched experiment kinds: {cfg_a.experiment_kind} vs "
                              f"{cfg_b.experiment_kind}")
        b = _values_for(cfg_b, sample_all(cfg_b))
        cut = min(_censoring_time(cfg_a), _censoring_time(cfg_b))
        if math.isfinite(cut):
            # an Euler run with no horizon censors at t_max; censor both alike
            a, b = np.where(a > cut, np.inf, a), np.where(b > cut, np.inf, b)
        if a.size == 0 or b.size == 0:
            raise ConfigError("compare needs non-empty samples")
        stat = oracle.two_sample_ks(a, b)
        n, m = a.size, b.size
        default_tol = 1.36 * math.sqrt((n + m) / (n * m)) * safety
        report = {"mode": "two-sample", "n_a": n, "n_b": m, "p_value": oracle.ks_pvalue(stat, n, m)}
    else:
        cdf = oracle_cdf(cfg_a, oracle_name)
        if a.size == 0:
            raise ConfigError("compare needs a non-empty sample")
        stat = oracle.ks_statistic(a, cdf)
        default_tol = 1.36 / math.sqrt(a.size) * safety
        report = {"mode": "one-sample", "oracle": oracle_name, "n_a": int(a.size),
                  "p_value": oracle.ks_pvalue(stat, a.size)}
    tol = tolerance if tolerance is not None else (cfg_a.tolerance or default_tol)
    report.update({"experiment_kind": cfg_a.experiment_kind, "ks": stat, "tolerance": tol,
                   "pass": bool(stat < tol)})
    return report


def validate(cfg: ExperimentConfig, grid=(5, 2001), y_low=None) -> tuple[int, str]:
    p = _reduced_problem(cfg)
    rep = validate_bounds(cfg.drift, p, grid, y_low=y_low)
    lines = [rep.summary()]
    for v in rep.violations[:50]:
        lines.append(f"  {v.kind} at t={v.t:.6g}, y={v.y:.6g}: value {v.value:.6g}")
    if len(rep.violations) > 50:
        lines.append(f"  ... {len(rep.violations) - 50} more")
    return (EXIT_OK if rep.clean else EXIT_VIOLATIONS), "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpt", description="Exact first-passage time sampling")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_overrides(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int, dest="sample_count")
        p.add_argument("--workers", type=int, dest="worker_count")

    r = sub.add_parser("run", help="draw samples and write samples.csv, summary.json, histogram.csv")
    r.add_argument("config")
    add_overrides(r)
    r.add_argument("--out-dir")
    c = sub.add_parser("compare", help="KS comparison of two configs or a config and an oracle")
    c.add_argument("config")
    c.add_argument("other", nargs="?")
    c.add_argument("--oracle", choices=ORACLES)
    c.add_argument("--tolerance", type=float)
    add_overrides(c)
    v = sub.add_parser("validate", help="grid scan of the declared gamma and beta bounds")
    v.add_argument("config")
    v.add_argument("--grid", type=int, nargs=2, metavar=("N_T", "N_Y"), default=(5, 2001))
    v.add_argument("--y-low", type=float)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    overrides = {k: getattr(args, k, None) for k in ("seed", "sample_count", "worker_count")}
    try:
        if args.command == "run":
            cfg = load_config(args.config, overrides)
            if args.out_dir:
                cfg.out_dir = Path(args.out_dir)
            return run(cfg)
        if args.command == "compare":
            if (args.other is None) == (args.oracle is None):
                raise ConfigError("compare takes a second config or --oracle, exactly one")
            a = load_config(args.config, overrides)
            b = load_config(args.other, overrides) if args.other else None
            if b is not None and overrides.get("seed") is None and b.seed == a.seed:
                print("warning: both configs use the same seed", file=sys.stderr)
            try:
                rep = compare(a, b, args.oracle, args.tolerance)
            except RunFailure as exc:
                print(f"diagnostic: {exc.diagnostic}", file=sys.stderr)
                return EXIT_DIAGNOSTIC
            print(json.dumps(rep, indent=2))
            return EXIT_OK if rep["pass"] else EXIT_FAIL
        if args.command == "validate":
            cfg = load_config(args.config)
            code, text = validate(cfg, tuple(args.grid), args.y_low)
            print(text)
            return code
    except ConfigReadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
