import csv
import json
import math

import numpy as np
import pytest

from exactfpt import cli

BM = """
[model]
drift = 0
kappa = 1
beta_plus = 0

[problem]
y0 = -1
level = 1
horizon = inf
acknowledge_finiteness = true

[run]
algorithm = jd
sample_count = {n}
seed = 11
block_size = {block}
"""

SJD = """
[model]
drift = 2+sin(y)
beta = 2*y-cos(y)
kappa = 5
beta_plus = 4

[jumps]
lambda = 1
marks = uniform(-0.25, 0.25)
jump = -v*sin(y)

[problem]
y0 = -1
level = 1
horizon = 3

[run]
algorithm = {alg}
sample_count = {n}
seed = {seed}
block_size = 250
euler_step = 1e-3
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(path):
    with open(path) as fh:
        first = fh.readline()
        return first, list(csv.DictReader(fh))


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = write(tmp_path, "bm.ini", BM.format(n=2500, block=1000))
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out-dir", str(out)]) == cli.EXIT_OK
    first, r = rows(out / "samples.csv")
    assert first.startswith("# config_sha256=")
    assert list(r[0]) == cli.SAMPLE_HEADER
    assert len(r) == 2500
    assert [(int(x["stream_id"]), int(x["draw_index"])) for x in r[:2]] == [(0, 0), (0, 1)]
    assert {x["kind"] for x in r} == {"diffusion-hit"}
    assert all(float(x["position"]) == 1.0 for x in r)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["sample_count"] == 2500 and summary["seed"] == 11
    assert summary["kind_counts"]["diffusion-hit"] == 2500
    with open(out / "histogram.csv") as fh:
        fh.readline()
        h = list(csv.DictReader(fh))
    assert sum(int(x["count"]) for x in h) == 2500
    printed = json.loads(capsys.readouterr().out)
    assert printed["algorithm"] == "jd"


def test_run_zero_samples(tmp_path):
    cfg = write(tmp_path, "bm.ini", BM.format(n=0, block=1000))
    out = tmp_path / "out"
    assert cli.main(["run", cfg, "--out-dir", str(out)]) == cli.EXIT_OK
    first, r = rows(out / "samples.csv")
    assert r == []
    assert (out / "samples.csv").read_text().splitlines()[1] == ",".join(cli.SAMPLE_HEADER)


def test_overrides_and_hash(tmp_path):
    cfg = write(tmp_path, "bm.ini", BM.format(n=100, block=1000))
    a = cli.load_config(cfg, {"seed": 5, "sample_count": 7, "worker_count": 3})
    assert (a.seed, a.sample_count, a.worker_count) == (5, 7, 3)
    b = cli.load_config(cfg, {"seed": 5, "sample_count": 7, "worker_count": 1})
    c = cli.load_config(cfg, {"seed": 6, "sample_count": 7})
    assert a.config_hash == b.config_hash != c.config_hash


def test_workers_do_not_change_samples(tmp_path):
    cfg = write(tmp_path, "sjd.ini", SJD.format(alg="sjd", n=2000, seed=3))
    texts = []
    for w in (1, 8):
        out = tmp_path / f"w{w}"
        assert cli.main(["run", cfg, "--workers", str(w), "--out-dir", str(out)]) == 0
        texts.append((out / "samples.csv").read_bytes())
    assert texts[0] == texts[1]


def test_outcome_invariants_in_csv(tmp_path):
    cfg = write(tmp_path, "sjd.ini", SJD.format(alg="sjd", n=1500, seed=4))
    out = tmp_path / "o"
    assert cli.main(["run", cfg, "--out-dir", str(out)]) == 0
    d = cli.read_samples(out / "samples.csv")
    kinds = d["kind"]
    pos, t = d["position"], d["time"]
    assert np.all(pos[kinds == "diffusion-hit"] == 1.0)
    assert np.all(pos[kinds == "jump-hit"] >= 1.0)
    assert np.all((t[kinds == "horizon-capped"] == 3.0) & (pos[kinds == "horizon-capped"] < 1.0))
    assert np.all(d["jumps_consumed"] <= d["segments"])


@pytest.mark.parametrize("edit,needle", [
    (("algorithm = jd", "algorithm = magic"), "unknown algorithm"),
    (("acknowledge_finiteness = true", ""), "acknowledge_finiteness"),
    (("horizon = inf", "horizon = 2"), "horizon"),
    (("drift = 0", "drift = 2+"), "expected"),
    (("y0 = -1", "y0 = 2"), "level"),
    (("sample_count = 10", "sample_count = -1"), "sample_count"),
    (("[run]", "[nothing]"), "[run]"),
])
def test_config_errors_exit_2(tmp_path, capsys, edit, needle):
    cfg = write(tmp_path, "bad.ini", BM.format(n=10, block=1000).replace(*edit))
    assert cli.main(["run", cfg, "--out-dir", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_jumps_need_jump_algorithm(tmp_path):
    cfg = write(tmp_path, "j.ini", SJD.format(alg="sd", n=10, seed=1))
    with pytest.raises(cli.ConfigError, match="ignores jumps"):
        cli.load_config(cfg)


def test_missing_config_is_io_error(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.ini")]) == cli.EXIT_IO


def test_draw_cap_diagnostic_exit_3(tmp_path, monkeypatch, capsys):
    cfg = write(tmp_path, "sjd.ini", SJD.format(alg="sjd", n=600, seed=2))
    monkeypatch.setenv("FPT_MAX_DRAWS", "20")
    out = tmp_path / "o"
    assert cli.main(["run", cfg, "--out-dir", str(out)]) == cli.EXIT_DIAGNOSTIC
    assert "draw cap" in capsys.readouterr().err
    summary = json.loads((out / "summary.json").read_text())
    assert summary["sample_count"] < 600 and "diagnostic" in summary


def test_validate_exit_codes(tmp_path, capsys):
    good = write(tmp_path, "g.ini", SJD.format(alg="sjd", n=10, seed=1))
    assert cli.main(["validate", good, "--grid", "3", "401"]) == cli.EXIT_OK
    bad = write(tmp_path, "b.ini", SJD.format(alg="sjd", n=10, seed=1).replace("kappa = 5", "kappa = 2"))
    assert cli.main(["validate", bad, "--grid", "3", "401"]) == cli.EXIT_VIOLATIONS
    assert "gamma>kappa" in capsys.readouterr().out


def test_compare_with_oracle(tmp_path, capsys):
    cfg = write(tmp_path, "bm.ini", BM.format(n=20000, block=5000))
    assert cli.main(["compare", cfg, "--oracle", "bm_fpt"]) == cli.EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["mode"] == "one-sample" and rep["pass"] and rep["ks"] < rep["tolerance"]
    assert cli.main(["compare", cfg, "--oracle", "bm_fpt", "--tolerance", "1e-9"]) == cli.EXIT_FAIL


def test_compare_two_configs(tmp_path, capsys):
    a = write(tmp_path, "a.ini", SJD.format(alg="sjd", n=4000, seed=1))
    b = write(tmp_path, "b.ini", SJD.format(alg="euler", n=4000, seed=2))
    assert cli.main(["compare", a, b]) == cli.EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["mode"] == "two-sample" and rep["n_a"] == rep["n_b"] == 4000


def test_compare_rejects_mismatched_kinds(tmp_path):
    a = write(tmp_path, "a.ini", BM.format(n=10, block=1000))
    b = write(tmp_path, "b.ini", BM.format(n=10, block=1000).replace("algorithm = jd", "algorithm = cd")
              .replace("horizon = inf", "horizon = 1"))
    assert cli.main(["compare", a, b]) == cli.EXIT_CONFIG
    assert cli.main(["compare", a]) == cli.EXIT_CONFIG
    assert cli.main(["compare", a, "--oracle", "cbm"]) == cli.EXIT_CONFIG


def test_endpoint_run_and_cbm_oracle(tmp_path, capsys):
    text = BM.format(n=20000, block=5000).replace("algorithm = jd", "algorithm = cd").replace(
        "horizon = inf", "horizon = 1")
    cfg = write(tmp_path, "cd.ini", text)
    assert cli.main(["compare", cfg, "--oracle", "cbm"]) == cli.EXIT_OK
    out = tmp_path / "o"
    assert cli.main(["run", cfg, "--n", "50", "--out-dir", str(out)]) == 0
    d = cli.read_samples(out / "samples.csv")
    assert set(d["kind"]) == {"endpoint"} and np.all(d["time"] == 1.0) and np.all(d["position"] < 1.0)


LAMPERTI = """
[model]
mu = 1
sigma = 2
kappa = 1
beta_plus = 1

[problem]
y0 = 0
level = 1
horizon = inf
acknowledge_finiteness = true

[run]
algorithm = {alg}
sample_count = 20000
seed = 8
block_size = 5000
euler_step = 1e-3
"""


def test_lamperti_config_matches_euler(tmp_path, capsys):
    # dX = dt + 2 dB from 0 to 1: inverse Gaussian with mean 1, shape 1/4
    a = write(tmp_path, "a.ini", LAMPERTI.format(alg="hz"))
    out = tmp_path / "o"
    assert cli.main(["run", a, "--n", "20000", "--out-dir", str(out)]) == 0
    d = cli.read_samples(out / "samples.csv")
    assert np.all(d["position"] == 1.0)
    from exactfpt import oracle
    ks = oracle.ks_statistic(d["time"], lambda t: oracle.inverse_gaussian_cdf(t, 1.0, 0.25))
    assert ks < 1.36 / math.sqrt(20000) * 1.5
    b = write(tmp_path, "b.ini", LAMPERTI.format(alg="euler"))
    capsys.readouterr()
    assert cli.main(["compare", a, b]) == cli.EXIT_OK
