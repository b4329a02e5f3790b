"""Acceptance criteria, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py -v`` for one PASS/FAIL line per criterion
in the terminal summary. The getting-it-right criterion takes a few minutes.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from identlink.chains import SamplerConfig
from identlink.cli import compare_models, lemma_checks, main
from identlink.datasets import bundled_path, drift_test_data, synthetic_sparrow
from identlink.diagnostics import empirical_drift, getting_it_right, summarize
from identlink.io import read_poisson_csv
from identlink.link import lam, lam_inv
from identlink.poisson import PoissonData, collapse_duplicates, run_chains
from identlink.prior import GaussianPrior
from identlink.rand import make_stream, verify_ig_identity

PROBE_NORMS = (0.0, 3.0, 30.0)


@pytest.mark.criterion("1", "link exactness")
def test_link_exactness(criterion_detail):
    t0 = time.perf_counter()
    xi = np.logspace(-8, 8, 10_001)
    xi = np.concatenate([-xi[::-1], [0.0], xi])
    err_sym = np.max(np.abs(lam(xi) * lam(-xi) - 1.0))
    u = np.logspace(-8, 8, 10_001)
    err_inv = np.max(np.abs(lam(lam_inv(u)) / u - 1.0))
    elapsed = time.perf_counter() - t0
    criterion_detail(f"max rel err {err_sym:.1e} / {err_inv:.1e}, {elapsed:.3f} s")
    assert err_sym <= 1e-10 and err_inv <= 1e-10
    assert elapsed < 1.0


@pytest.mark.criterion("2", "inverse Gaussian normalising identity")
def test_ig_identity(criterion_detail):
    t0 = time.perf_counter()
    rng = make_stream(2)
    zs = []
    for kappa in (0.5, 1.0, 2.0):
        est, se = verify_ig_identity(rng, kappa, 1_000_000)
        zs.append((est - np.exp(-kappa)) / se)
    elapsed = time.perf_counter() - t0
    criterion_detail("z = " + ", ".join(f"{z:+.2f}" for z in zs) + f"; {elapsed:.1f} s")
    assert all(abs(z) <= 3 for z in zs)
    assert elapsed < 10.0


@pytest.mark.slow
@pytest.mark.criterion("3", "getting-it-right (three kernels + mutation)")
def test_getting_it_right(criterion_detail):
    n_outer = 200_000
    reports = {m: getting_it_right(m, n_outer=n_outer, rng=make_stream(3, i))
               for i, m in enumerate(("poisson", "multinomial", "explink"))}
    mutated = getting_it_right("poisson", n_outer=n_outer, rng=make_stream(3, 9), u_rate_factor=0.5)
    criterion_detail(", ".join(f"{m} max|z| {r.max_abs_z:.2f}" for m, r in reports.items())
                     + f"; mutated max|z| {mutated.max_abs_z:.1f}")
    for m, r in reports.items():
        assert r.n_outer == n_outer
        assert np.all(np.abs(r.z) <= 3), (m, list(r.rows()))
    assert np.max(np.abs(mutated.z)) > 5


def _probe_betas(p, seed):
    rng = make_stream(seed)
    out = []
    for r in PROBE_NORMS:
        d = rng.standard_normal(p)
        out.append(r * d / np.linalg.norm(d))
    return out


@pytest.mark.criterion("4", "rescaled latent u is Ga(y, 1)")
def test_uhat_law(criterion_detail):
    t0 = time.perf_counter()
    data = drift_test_data()
    rows = lemma_checks(data, PROBE_NORMS, 100_000, make_stream(4))
    ks = [r for r in rows if r["check"] == "uhat_ks"]
    elapsed = time.perf_counter() - t0
    criterion_detail(f"{len(ks)} KS tests, min p {min(r['pvalue'] for r in ks):.3g} "
                     f"vs {0.01 / len(ks):.2g}; {elapsed:.1f} s (with C5 draws)")
    assert len(ks) == len(PROBE_NORMS) * data.n
    assert all(r["pass"] for r in ks)
    assert elapsed < 30.0


@pytest.mark.criterion("5", "latent t-hat moment bound")
def test_t_hat_bound(criterion_detail):
    from identlink.diagnostics import lemma4_bound_test
    t0 = time.perf_counter()
    data = drift_test_data()
    rng = make_stream(5)
    worst = -np.inf
    ok = True
    for beta in _probe_betas(data.p, 50):
        for i in range(data.n):
            for h in ("square", "abs", "fourth"):
                lhs, se, rhs = lemma4_bound_test(data, beta, i, h, 100_000, rng)
                worst = max(worst, (lhs - rhs) / se)
                ok &= lhs <= rhs + 3 * se
    elapsed = time.perf_counter() - t0
    criterion_detail(f"max (lhs - bound)/SE = {worst:.1f}; {elapsed:.1f} s")
    assert ok
    assert elapsed < 30.0


@pytest.mark.criterion("6", "drift ratio below 1 at norm 1e3")
def test_drift(criterion_detail):
    t0 = time.perf_counter()
    data, _ = read_poisson_csv(bundled_path("drift_design.csv"))
    assert np.all(data.counts >= 1) and np.linalg.matrix_rank(data.design) == data.p
    prior = GaussianPrior.isotropic(data.p, precision=0.01)
    rep = empirical_drift(data, prior, [0.0, 1.0, 10.0, 100.0, 1000.0], 4, 10_000, make_stream(6))
    bound = rep.worst_ratio_bound(1000.0)
    elapsed = time.perf_counter() - t0
    worst = max(rep.at_norm(1000.0), key=lambda pt: pt.ratio)
    criterion_detail(f"worst ratio {worst.ratio:.5f} (SE {worst.ratio_se:.1e}); {elapsed:.1f} s")
    assert all(pt.error is None for pt in rep.points)
    assert bound < 1.0
    assert elapsed < 60.0


@pytest.mark.criterion("7", "collapsing duplicate rows leaves the posterior unchanged")
def test_reproductive(criterion_detail):
    X = np.array([[1.0, -1.0], [1.0, -1.0], [1.0, 0.0], [1.0, 0.5], [1.0, 0.5], [1.0, 1.5]])
    data = PoissonData(X, np.array([1, 3, 2, 4, 2, 6]))
    collapsed = collapse_duplicates(data)
    assert collapsed.n == 4
    prior = GaussianPrior.isotropic(2, precision=0.01)
    cfg = SamplerConfig(burn_in=1000, keep=50_000, seed=7)
    a = summarize(run_chains(data, prior, cfg))
    b = summarize(run_chains(collapsed, prior, SamplerConfig(burn_in=1000, keep=50_000, seed=8)))
    z = (a.mean - b.mean) / np.sqrt(a.mcse**2 + b.mcse**2)
    criterion_detail("z = " + ", ".join(f"{v:+.2f}" for v in z))
    assert np.all(np.abs(z) <= 3)


def _sparrow_check(data: PoissonData, criterion_detail, label: str):
    t0 = time.perf_counter()
    prior = GaussianPrior(np.zeros(3), np.eye(3) / 100.0)
    _, _, groups = compare_models(data, prior, ["const", "age", "age2"], 5000, 5000, seed=1, label_column=1)
    elapsed = time.perf_counter() - t0
    by_age = {int(g["x"][1]): g for g in groups}
    gap = max(abs(by_age[a]["lambda_mean"] - by_age[a]["exp_mean"]) for a in range(1, 6))
    track = max(abs(by_age[a][k] - by_age[a]["observed_mean"])
                for a in range(1, 5) for k in ("lambda_mean", "exp_mean"))
    criterion_detail(f"{label}: max link gap {gap:.3f} (ages 1-5), max tracking error {track:.3f} "
                     f"(ages 1-4); {elapsed:.1f} s")
    assert sorted(by_age) == [1, 2, 3, 4, 5, 6]
    assert gap <= 0.15
    assert track <= 0.3
    assert elapsed < 60.0


@pytest.mark.criterion("8", "sparrow comparison, synthetic stand-in")
def test_sparrow_synthetic(criterion_detail):
    data, names = read_poisson_csv(bundled_path("sparrow_synthetic.csv"))
    assert (data.n, data.p) == (52, 3) and names == ["const", "age", "age2"]
    _sparrow_check(data, criterion_detail, "synthetic")


def _real_sparrow_path():
    env = os.environ.get("IDENTLINK_SPARROW_CSV")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[1] / "data" / "sparrow.csv"


@pytest.mark.criterion("8r", "sparrow comparison, fetched data")
def test_sparrow_real(criterion_detail):
    path = _real_sparrow_path()
    if not path.is_file():
        pytest.skip("sparrow data not fetched (see scripts/fetch_sparrow.py)")
    data, names = read_poisson_csv(path)
    assert (data.n, data.p) == (52, 3)
    _sparrow_check(data, criterion_detail, "fetched")


@pytest.mark.criterion("9", "fit is byte-deterministic")
@pytest.mark.parametrize("model", ["poisson-lambda", "poisson-exp", "multinomial-lambda"])
def test_fit_determinism(tmp_path, model, criterion_detail):
    if model == "multinomial-lambda":
        data = tmp_path / "m.csv"
        assert main(["simulate", "--model", model, "--n", "5", "--p", "2", "--seed", "9",
                     "--out", str(data)]) == 0
    else:
        data = bundled_path("sparrow_synthetic.csv")
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(f"model = {model}\ndata = {data}\nburn_in = 200\nkeep = 300\nn_chains = 2\nseed = 11\n")
    outs = []
    for run in ("a", "b"):
        assert main(["fit", "--config", str(cfg), "--out-dir", str(tmp_path / run)]) == 0
        outs.append((tmp_path / run / "draws.csv").read_bytes())
    criterion_detail(f"{model}: {len(outs[0])} bytes identical")
    assert outs[0] == outs[1]
