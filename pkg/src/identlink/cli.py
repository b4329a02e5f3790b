"""Command-line entry point: ``identlink <subcommand> [options]``.

Exit codes: 0 success, 1 validation failure (bad input or a failed check),
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .chains import SamplerConfig, SamplerError
from .datasets import bundled_path, simulate_multinomial, simulate_poisson
from .explink import MhConfig, run_mh_chain
from .io import (
    MODELS, ParseError, RunConfig, read_config, read_draws, read_multinomial_csv,
    read_poisson_csv, write_draws, write_multinomial_csv, write_poisson_csv, write_report,
    write_rows, write_summary, format_table,
)
from .multinomial import run_chains as run_multinomial
from .plots import Panel, emit_density_svg
from .poisson import PoissonData, posterior_predictive_mean, run_chains as run_poisson
from .prior import GaussianPrior
from .rand import make_stream

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _load_config(args) -> tuple[RunConfig, Path]:
    if args.config:
        cfg = read_config(args.config)
        base = Path(args.config).parent
    else:
        cfg = RunConfig()
        base = Path(".")
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "data", None):
        cfg.data = args.data
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir:
        cfg.out_dir = args.out_dir
    if cfg.model not in MODELS:
        raise UsageError(f"unknown model {cfg.model!r}")
    if not cfg.data:
        raise UsageError("no data file given (use 'data = ...' in the config or --data)")
    return cfg, base


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit(cfg: RunConfig, base: Path):
    if cfg.model == "multinomial-lambda":
        data, names, _ = read_multinomial_csv(cfg.data)
    else:
        data, names = read_poisson_csv(cfg.data)
    prior = cfg.prior(data.p, base)
    if cfg.model == "poisson-exp":
        mh = MhConfig(burn_in=cfg.burn_in, keep=cfg.keep, thin=cfg.thin, n_chains=cfg.n_chains,
                      seed=cfg.seed, initial_step=cfg.initial_step, target_accept=cfg.target_accept)
        return run_mh_chain(data, prior, mh, names=names), data, names, prior
    sc = SamplerConfig(burn_in=cfg.burn_in, keep=cfg.keep, thin=cfg.thin, n_chains=cfg.n_chains,
                       seed=cfg.seed, init_beta=cfg.init, store_latents=cfg.store_latents)
    runner = run_multinomial if cfg.model == "multinomial-lambda" else run_poisson
    return runner(data, prior, sc, names=names), data, names, prior


def cmd_fit(args) -> int:
    cfg, base = _load_config(args)
    draws, _, _, _ = _fit(cfg, base)
    out = _out_dir(cfg.out_dir)
    write_draws(draws, out / "draws.csv")
    summary = diag.summarize(draws)
    write_summary(summary, out / "summary.csv")
    if draws.latents:
        for key, arr in draws.latents.items():
            np.savetxt(out / f"latent_{key}.csv", arr, delimiter=",", fmt="%.17g")
    acc = ", ".join(f"{a:.3f}" for a in draws.meta.get("acceptance_rate", []))
    (out / "run.txt").write_text(
        f"model = {cfg.model}\ndata = {cfg.data}\nseed = {cfg.seed}\n"
        f"burn_in = {cfg.burn_in}\nkeep = {cfg.keep}\nthin = {cfg.thin}\n"
        f"n_chains = {cfg.n_chains}\nacceptance_rate = {acc}\n")
    print(format_table(summary.rows()), end="")
    print(f"wrote {out / 'draws.csv'} and {out / 'summary.csv'}")
    return EXIT_OK


def cmd_predict(args) -> int:
    if args.model == "multinomial-lambda":
        raise UsageError("predict supports the Poisson models only")
    draws = read_draws(args.draws)
    newdata, names = read_poisson_csv(args.newdata, require_y=False)
    if names != draws.names:
        raise ParseError(args.newdata, f"design columns {names} do not match draws columns {draws.names}")
    link = "exp" if args.model == "poisson-exp" else "lambda"
    rows = []
    for i in range(newdata.n):
        vals, mean = posterior_predictive_mean(draws, newdata.design[i], newdata.exposures[i], link)
        q = np.quantile(vals, [0.025, 0.5, 0.975])
        rows.append({"row": i + 1, "mean": mean, "q2.5": q[0], "q50": q[1], "q97.5": q[2]})
    out = _out_dir(args.out_dir or os.environ.get("IDENTLINK_OUT_DIR", "out"))
    write_rows(rows, out / "predictions.csv")
    print(format_table(rows), end="")
    return EXIT_OK


def _groups(data: PoissonData):
    """Distinct design rows in order of first appearance, with member indices."""
    rows, first, inverse = np.unique(data.design, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    return [(rows[g], np.nonzero(inverse == g)[0]) for g in order]


def compare_models(data: PoissonData, prior: GaussianPrior, names, burn_in: int, keep: int, seed: int,
                   label_column: int | None = None):
    """Fit both links on identical data and prior; per-group predictive summaries."""
    lam_draws = run_poisson(data, prior, SamplerConfig(burn_in=burn_in, keep=keep, seed=seed), names=names)
    exp_draws = run_mh_chain(data, prior, MhConfig(burn_in=burn_in, keep=keep, seed=seed), names=names)
    groups = []
    for x, members in _groups(data):
        lam_vals, lam_mean = posterior_predictive_mean(lam_draws, x)
        exp_vals, exp_mean = posterior_predictive_mean(exp_draws, x, link="exp")
        label = f"{names[label_column]} = {x[label_column]:g}" if label_column is not None else \
            ", ".join(f"{v:g}" for v in x)
        groups.append({
            "label": label, "x": x, "n_obs": members.size,
            "observed_mean": float(data.counts[members].mean()),
            "lambda_mean": lam_mean, "exp_mean": exp_mean,
            "lambda_vals": lam_vals, "exp_vals": exp_vals,
        })
    if label_column is not None:
        groups.sort(key=lambda g: g["x"][label_column])
    return lam_draws, exp_draws, groups


def cmd_compare(args) -> int:
    cfg, base = _load_config(args)
    data, names = read_poisson_csv(cfg.data)
    prior = cfg.prior(data.p, base)
    label_column = None
    if args.label_column:
        if args.label_column not in names:
            raise UsageError(f"--label-column {args.label_column!r} is not a design column")
        label_column = names.index(args.label_column)
    lam_draws, exp_draws, groups = compare_models(data, prior, names, cfg.burn_in, cfg.keep, cfg.seed, label_column)
    out = _out_dir(cfg.out_dir)
    write_draws(lam_draws, out / "draws_lambda.csv")
    write_draws(exp_draws, out / "draws_exp.csv")
    panels = [[Panel(g["lambda_vals"], g["label"], g["lambda_mean"], g["observed_mean"]),
               Panel(g["exp_vals"], g["label"], g["exp_mean"], g["observed_mean"])] for g in groups]
    emit_density_svg(panels, out / "compare.svg", title="Posterior conditional means",
                     column_titles=["approximate identity link", "exponential link"])
    pred_rows = [{k: g[k] for k in ("label", "n_obs", "observed_mean", "lambda_mean", "exp_mean")} for g in groups]
    write_rows(pred_rows, out / "compare_predictive.csv")
    s_lam, s_exp = diag.summarize(lam_draws), diag.summarize(exp_draws)
    ess_rows = [{"param": n, "ess_lambda": s_lam.ess[k], "ess_exp": s_exp.ess[k]} for k, n in enumerate(names)]
    ess_rows.append({"param": "acceptance", "ess_lambda": 1.0, "ess_exp": exp_draws.meta["acceptance_rate"][0]})
    write_rows(ess_rows, out / "compare_ess.csv")
    print(format_table(pred_rows), end="")
    print(format_table(ess_rows), end="")
    print(f"wrote {out / 'compare.svg'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    key = {"poisson-lambda": "poisson", "poisson-exp": "explink", "multinomial-lambda": "multinomial"}[args.model]
    extra = {}
    if args.mutate:
        if key != "poisson":
            raise UsageError("--mutate is available for poisson-lambda only")
        extra["u_rate_factor"] = 0.5
    seed = 0 if args.seed is None else args.seed
    report = diag.getting_it_right(key, n_outer=args.outer, rng=make_stream(seed), **extra)
    out = _out_dir(args.out_dir or os.environ.get("IDENTLINK_OUT_DIR", "out"))
    suffix = "_mutated" if args.mutate else ""
    write_report(report, out / f"gir_{args.model}{suffix}.csv",
                 title=f"getting-it-right: {args.model}{suffix}, {args.outer} outer iterations")
    print(format_table(report.rows()), end="")
    print(f"max |z| = {report.max_abs_z:.3f}: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _probe_data(args) -> tuple[PoissonData, GaussianPrior]:
    data, _ = read_poisson_csv(args.data or bundled_path("drift_design.csv"))
    prior = GaussianPrior(np.zeros(data.p), args.prior_precision * np.eye(data.p))
    return data, prior


def cmd_drift(args) -> int:
    data, prior = _probe_data(args)
    if np.any(data.counts < 1) or np.linalg.matrix_rank(data.design) < data.p:
        print("warning: data do not satisfy y_i >= 1 and full-rank design", file=sys.stderr)
    norms = _floats(args.norms)
    seed = 0 if args.seed is None else args.seed
    report = diag.empirical_drift(data, prior, norms, args.directions, args.n_mc, make_stream(seed))
    out = _out_dir(args.out_dir or os.environ.get("IDENTLINK_OUT_DIR", "out"))
    write_report(report, out / "drift.csv", title=f"one-step energy ratio, n_mc = {args.n_mc}")
    bound = report.worst_ratio_bound(norms[-1])
    print(format_table(report.rows()), end="")
    ok = bound < 1.0
    print(f"largest norm {norms[-1]:g}: max(ratio + 3 SE) = {bound:.4f}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def lemma_checks(data: PoissonData, norms, n_draws: int, rng, alpha: float = 0.01):
    """KS checks of ``b_i u_i`` and the ``2 E[h(z)]`` bound at random ``beta`` of each norm."""
    rows = []
    n_tests = len(norms) * int(np.sum(data.counts >= 1))
    for r in norms:
        d = rng.standard_normal(data.p)
        beta = r * d / np.linalg.norm(d)
        for res in diag.uhat_marginal_test(data, beta, n_draws, rng):
            rows.append({"check": "uhat_ks", "norm": r, "obs": res.index, "h": "",
                         "value": res.ks, "se": "", "bound": "", "pvalue": res.pvalue,
                         "pass": res.pvalue > alpha / n_tests})
        for i in np.nonzero(data.counts >= 1)[0]:
            for h in ("square", "abs", "fourth"):
                lhs, se, rhs = diag.lemma4_bound_test(data, beta, int(i), h, n_draws, rng)
                rows.append({"check": "t_hat_bound", "norm": r, "obs": int(i), "h": h,
                             "value": lhs, "se": se, "bound": rhs, "pvalue": "",
                             "pass": lhs <= rhs + 3 * se})
    return rows


def cmd_lemma(args) -> int:
    data, _ = _probe_data(args)
    seed = 0 if args.seed is None else args.seed
    rows = lemma_checks(data, _floats(args.beta_norms), args.draws, make_stream(seed))
    out = _out_dir(args.out_dir or os.environ.get("IDENTLINK_OUT_DIR", "out"))
    write_rows(rows, out / "lemma.csv")
    print(format_table(rows), end="")
    ok = all(r["pass"] for r in rows)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rng = make_stream(seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    beta = np.array(_floats(args.beta)) if args.beta else rng.standard_normal(args.p)
    if beta.shape != (args.p,):
        raise UsageError(f"--beta must have {args.p} entries")
    if args.model == "multinomial-lambda":
        covs = [rng.standard_normal((args.categories, args.p)) for _ in range(args.n)]
        data = simulate_multinomial(covs, [args.trials] * args.n, beta, rng)
        write_multinomial_csv(data, out)
    else:
        X = np.column_stack([np.ones(args.n), rng.standard_normal((args.n, args.p - 1))])
        link = "exp" if args.model == "poisson-exp" else "lambda"
        data = simulate_poisson(X, beta, rng, link=link)
        write_poisson_csv(data, out, names=["const"] + [f"x{k}" for k in range(1, args.p)], with_exposure=False)
    print(f"wrote {out} (beta = {', '.join(f'{b:.4g}' for b in beta)})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="identlink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p, model_default=None):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", help="output directory (default: $IDENTLINK_OUT_DIR or ./out)")
        p.add_argument("--model", choices=MODELS, default=model_default)

    p = sub.add_parser("fit", help="run a sampler, write draws and a summary")
    common(p)
    p.add_argument("--data")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="posterior predictive means at new covariate rows")
    common(p, "poisson-lambda")
    p.add_argument("--draws", required=True)
    p.add_argument("--newdata", required=True, help="CSV with the design columns (optional exposure)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="identity vs exponential link on the same data")
    common(p)
    p.add_argument("--data")
    p.add_argument("--label-column", help="design column used to label groups (e.g. age)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="getting-it-right check of a sampler kernel")
    common(p, "poisson-lambda")
    p.add_argument("--outer", type=int, default=200_000)
    p.add_argument("--mutate", action="store_true", help="use a deliberately wrong kernel")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("drift-check", help="Monte Carlo one-step energy ratios")
    common(p)
    p.add_argument("--data", help="Poisson CSV (default: bundled drift design)")
    p.add_argument("--prior-precision", type=float, default=0.01)
    p.add_argument("--norms", default="0,1,10,100,1000")
    p.add_argument("--directions", type=int, default=4)
    p.add_argument("--n-mc", type=int, default=10_000)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("lemma-check", help="latent-variable law and bound checks")
    common(p)
    p.add_argument("--data", help="Poisson CSV (default: bundled drift design)")
    p.add_argument("--prior-precision", type=float, default=0.01)
    p.add_argument("--beta-norms", default="0,3,30")
    p.add_argument("--draws", type=int, default=100_000)
    p.set_defaults(func=cmd_lemma)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    common(p, "poisson-lambda")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--beta", help="comma-separated coefficients (default: standard normal draw)")
    p.add_argument("--categories", type=int, default=2)
    p.add_argument("--trials", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"identlink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValueError, SamplerError, FileNotFoundError) as exc:
        print(f"identlink: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
