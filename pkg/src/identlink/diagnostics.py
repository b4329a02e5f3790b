"""Chain diagnostics and Monte Carlo probes of sampler correctness.

* ``effective_sample_size``, ``geweke_z``, ``summarize``: chain quality.
* ``getting_it_right``: compares the marginal-conditional and
  successive-conditional simulators of the joint ``(beta, y)`` law.
* ``uhat_marginal_test``, ``lemma4_bound_test``: distributional facts about the
  Poisson latents at a fixed ``beta``.
* ``empirical_drift``: Monte Carlo estimate of the one-step expected energy
  ``E[V(beta') | beta0]`` with ``V(beta) = beta' Psi beta``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .chains import DrawMatrix
from .link import LinkValue
from .poisson import PoissonData, draw_latents as poisson_latents
from .prior import GaussianPrior
from .rand import inverse_gaussian_core


class ConstantChainWarning(UserWarning):
    pass


class LowPowerWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# chain quality

def autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance at every lag, via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def effective_sample_size(draws) -> float:
    """ESS from Geyer's initial monotone sequence estimator.

    Pairs of autocorrelations ``rho_{2k} + rho_{2k+1}`` are summed while positive
    and forced non-increasing. The result is capped at the number of draws. A
    constant chain returns its length with a :class:`ConstantChainWarning`.
    """
    x = np.asarray(draws, dtype=float).ravel()
    n = x.shape[0]
    if n < 10:
        raise ValueError(f"need at least 10 draws, got {n}")
    acov = autocovariance(x)
    if acov[0] <= 0 or not np.isfinite(acov[0]):
        warnings.warn("constant chain; ESS set to its length", ConstantChainWarning, stacklevel=2)
        return float(n)
    rho = acov / acov[0]
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    neg = np.nonzero(pairs <= 0)[0]
    k = neg[0] if neg.size else n_pairs
    pairs = np.minimum.accumulate(pairs[:k])
    tau = -1.0 + 2.0 * pairs.sum()
    return float(min(n, n / tau)) if tau > 0 else float(n)


def mcse(draws) -> float:
    x = np.asarray(draws, dtype=float)
    sd = x.std(ddof=1)
    if sd == 0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantChainWarning)
        return float(sd / np.sqrt(effective_sample_size(x)))


def geweke_z(draws, first: float = 0.1, last: float = 0.5) -> float:
    """Geweke's z comparing the first 10% and last 50% of a chain.

    Each segment's variance of the mean uses its own ESS.
    """
    x = np.asarray(draws, dtype=float).ravel()
    n = x.shape[0]
    na, nb = int(first * n), int(last * n)
    if na < 10 or nb < 10:
        raise ValueError(f"chain of length {n} is too short for a Geweke comparison")
    a, b = x[:na], x[n - nb:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantChainWarning)
        var = a.var(ddof=1) / effective_sample_size(a) + b.var(ddof=1) / effective_sample_size(b)
    if var == 0:
        return 0.0 if a.mean() == b.mean() else float(np.sign(a.mean() - b.mean()) * np.inf)
    return float((a.mean() - b.mean()) / np.sqrt(var))


@dataclass
class ChainSummary:
    names: list[str]
    mean: np.ndarray
    sd: np.ndarray
    q025: np.ndarray
    q50: np.ndarray
    q975: np.ndarray
    ess: np.ndarray
    mcse: np.ndarray
    geweke: np.ndarray
    n_draws: int

    def rows(self):
        for k, name in enumerate(self.names):
            yield {
                "param": name, "mean": self.mean[k], "sd": self.sd[k],
                "q2.5": self.q025[k], "q50": self.q50[k], "q97.5": self.q975[k],
                "ess": self.ess[k], "mcse": self.mcse[k], "geweke_z": self.geweke[k],
            }


def summarize(draws: DrawMatrix) -> ChainSummary:
    """Per-coordinate summary pooled over chains.

    ESS is the sum of per-chain ESS; the Geweke score combines per-chain scores
    as ``sum(z_c) / sqrt(n_chains)``, which is standard normal under the null.
    """
    chains = draws.by_chain()
    p = draws.p
    ess = np.zeros(p)
    gz = np.zeros(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantChainWarning)
        for c in chains:
            for k in range(p):
                ess[k] += effective_sample_size(c[:, k])
                gz[k] += geweke_z(c[:, k])
    gz /= np.sqrt(len(chains))
    x = draws.beta
    sd = x.std(axis=0, ddof=1)
    q = np.quantile(x, [0.025, 0.5, 0.975], axis=0)
    return ChainSummary(
        names=list(draws.names), mean=x.mean(axis=0), sd=sd,
        q025=q[0], q50=q[1], q975=q[2], ess=ess, mcse=sd / np.sqrt(ess),
        geweke=gz, n_draws=draws.n_draws,
    )


# ---------------------------------------------------------------------------
# getting it right

@dataclass
class GirModel:
    """What the harness needs from a model.

    ``kernel(theta, y, rng)`` must leave ``p(theta | y)`` invariant.
    """

    sample_prior: Callable
    simulate: Callable
    kernel: Callable
    test_functions: Callable
    names: list[str]


@dataclass
class GirReport:
    names: list[str] = field(default_factory=list)
    mean_marginal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mean_successive: np.ndarray = field(default_factory=lambda: np.zeros(0))
    se_marginal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    se_successive: np.ndarray = field(default_factory=lambda: np.zeros(0))
    z: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_outer: int = 0
    threshold: float = 3.0

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z))) if self.z.size else 0.0

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.z) <= self.threshold))

    def rows(self):
        for k, name in enumerate(self.names):
            yield {
                "function": name,
                "marginal_mean": self.mean_marginal[k], "marginal_se": self.se_marginal[k],
                "successive_mean": self.mean_successive[k], "successive_se": self.se_successive[k],
                "z": self.z[k],
            }


def run_getting_it_right(model: GirModel, n_outer: int, rng: np.random.Generator,
                         threshold: float = 3.0) -> GirReport:
    """Compare both joint simulators over ``n_outer`` iterations each."""
    if n_outer <= 0:
        return GirReport(threshold=threshold)
    k = len(model.names)
    marg = np.empty((n_outer, k))
    for t in range(n_outer):
        theta = model.sample_prior(rng)
        marg[t] = model.test_functions(theta, model.simulate(theta, rng))

    succ = np.empty((n_outer, k))
    theta = model.sample_prior(rng)
    y = model.simulate(theta, rng)
    for t in range(n_outer):
        theta = model.kernel(theta, y, rng)
        y = model.simulate(theta, rng)
        succ[t] = model.test_functions(theta, y)

    mean_m, mean_s = marg.mean(axis=0), succ.mean(axis=0)
    se_m = marg.std(axis=0, ddof=1) / np.sqrt(n_outer)
    se_s = np.array([mcse(succ[:, j]) for j in range(k)])
    denom = np.sqrt(se_m**2 + se_s**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(denom > 0, (mean_m - mean_s) / denom, 0.0)
    return GirReport(list(model.names), mean_m, mean_s, se_m, se_s, z, n_outer, threshold)


@dataclass
class GirSpec:
    """A small model for the harness.

    ``design`` is ``n x p`` for the Poisson models; for the multinomial model
    it is a list of per-observation ``(p_i, p)`` covariate arrays and
    ``trials`` gives ``m_i``.
    """

    design: object
    prior: GaussianPrior
    exposures: np.ndarray | None = None
    trials: np.ndarray | None = None


def default_gir_spec(model: str) -> GirSpec:
    """The small designs used by the acceptance suite (n=3, p=2, prior N(0, I))."""
    prior = GaussianPrior.isotropic(2)
    if model in ("poisson", "poisson-lambda", "explink", "poisson-exp"):
        X = np.array([[1.0, -0.5], [1.0, 0.3], [1.0, 1.1]])
        return GirSpec(X, prior, exposures=np.ones(3))
    if model in ("multinomial", "multinomial-lambda"):
        covs = [
            np.array([[1.0, 0.0], [0.0, 1.0]]),
            np.array([[0.5, -0.4], [-0.3, 0.8]]),
            np.array([[1.0, 0.7], [-0.6, 0.2]]),
        ]
        return GirSpec(covs, prior, trials=np.array([2, 2, 2]))
    raise ValueError(f"unknown model {model!r}")


def _poisson_like_functions(theta, y):
    return np.concatenate([theta, theta**2, y, y.astype(float) ** 2, np.outer(theta, y).ravel()])


def _poisson_like_names(p, n):
    return ([f"beta{k}" for k in range(p)] + [f"beta{k}^2" for k in range(p)]
            + [f"y{i}" for i in range(n)] + [f"y{i}^2" for i in range(n)]
            + [f"beta{k}*y{i}" for k in range(p) for i in range(n)])


def poisson_gir_model(spec: GirSpec, u_rate_factor: float = 1.0) -> GirModel:
    """Harness wiring for the identity-link Poisson Gibbs kernel.

    ``u_rate_factor != 1`` builds a deliberately wrong kernel (mutation test).
    """
    from .link import lam
    from .poisson import draw_beta

    X = np.asarray(spec.design, dtype=float)
    n, p = X.shape
    expo = np.ones(n) if spec.exposures is None else np.asarray(spec.exposures, dtype=float)
    data = PoissonData(X, np.zeros(n, dtype=np.int64), expo)

    def simulate(theta, rng):
        return rng.poisson(expo * lam(X @ theta))

    def kernel(theta, y, rng):
        data.counts = y  # shared scratch object; y already validated by construction
        u, _, w = poisson_latents(theta, data, rng, u_rate_factor=u_rate_factor)
        return draw_beta(u, w, data, spec.prior, rng)

    return GirModel(spec.prior.sample, simulate, kernel, _poisson_like_functions, _poisson_like_names(p, n))


def explink_gir_model(spec: GirSpec, step: float = 0.8, n_steps: int = 3) -> GirModel:
    """Harness wiring for a fixed-step random-walk Metropolis kernel on the exp-link model."""
    from .explink import mh_kernel

    X = np.asarray(spec.design, dtype=float)
    n, p = X.shape
    expo = np.ones(n) if spec.exposures is None else np.asarray(spec.exposures, dtype=float)
    data = PoissonData(X, np.zeros(n, dtype=np.int64), expo)
    inner = mh_kernel(data, spec.prior, step, n_steps)

    def simulate(theta, rng):
        return rng.poisson(expo * np.exp(X @ theta))

    def kernel(theta, y, rng):
        data.counts = y
        return inner(theta, rng)

    return GirModel(spec.prior.sample, simulate, kernel, _poisson_like_functions, _poisson_like_names(p, n))


def multinomial_gir_model(spec: GirSpec) -> GirModel:
    from .multinomial import MultinomialData, beta_conditional, draw_latents
    from .rand import cholesky_lower, gaussian_from_precision

    covs = [np.atleast_2d(np.asarray(c, dtype=float)) for c in spec.design]
    trials = np.asarray(spec.trials, dtype=np.int64)
    start = [np.concatenate([[m], np.zeros(c.shape[0], dtype=np.int64)]) for m, c in zip(trials, covs)]
    data = MultinomialData(start, covs)
    p = data.p
    n_flat = data.y.shape[0]

    def simulate(theta, rng):
        lv = LinkValue.at(data.X @ theta)
        big = np.bincount(data.obs, weights=lv.lam, minlength=data.n)
        ys = []
        for i, c in enumerate(covs):
            probs = np.concatenate([[1.0], lv.lam[data.obs == i]]) / (1.0 + big[i])
            ys.append(rng.multinomial(trials[i], probs / probs.sum()))
        return ys

    def kernel(theta, ys, rng):
        data.y = np.concatenate([c[1:] for c in ys])
        u0, u, v = draw_latents(theta, data, rng)
        precision, shift = beta_conditional(u0, u, v, data, spec.prior)
        return gaussian_from_precision(cholesky_lower(precision), shift, rng.standard_normal(p))

    def functions(theta, ys):
        y = np.concatenate([c[1:] for c in ys]).astype(float)
        return np.concatenate([theta, theta**2, y, y**2, np.outer(theta, y).ravel()])

    labels = [f"y{i}_{k}" for i, c in enumerate(covs) for k in range(1, c.shape[0] + 1)]
    names = ([f"beta{k}" for k in range(p)] + [f"beta{k}^2" for k in range(p)]
             + labels + [f"{s}^2" for s in labels]
             + [f"beta{k}*{s}" for k in range(p) for s in labels])
    assert len(names) == 2 * p + 2 * n_flat + p * n_flat
    return GirModel(spec.prior.sample, simulate, kernel, functions, names)


def getting_it_right(model: str, small_spec: GirSpec | None = None, n_outer: int = 200_000,
                     rng: np.random.Generator | None = None, **kwargs) -> GirReport:
    """Run the harness for ``model`` in ``{"poisson", "multinomial", "explink"}``.

    Extra keyword arguments go to the model builder (e.g. ``u_rate_factor``).
    """
    key = {"poisson-lambda": "poisson", "poisson-exp": "explink",
           "multinomial-lambda": "multinomial"}.get(model, model)
    spec = small_spec if small_spec is not None else default_gir_spec(key)
    n_obs = len(spec.design)
    p = spec.prior.p
    if n_obs > 5 or p > 3:
        raise ValueError("getting-it-right is meant for small models (n <= 5, p <= 3)")
    builders = {"poisson": poisson_gir_model, "explink": explink_gir_model,
                "multinomial": multinomial_gir_model}
    if key not in builders:
        raise ValueError(f"unknown model {model!r}")
    rng = rng if rng is not None else np.random.default_rng(0)
    return run_getting_it_right(builders[key](spec, **kwargs), n_outer, rng)


# ---------------------------------------------------------------------------
# latent-variable probes

def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """One-sample two-sided KS critical value for ``n`` draws."""
    return float(stats.kstwo.ppf(1.0 - alpha, n))


@dataclass
class UhatResult:
    index: int
    y: int
    ks: float
    pvalue: float
    n_draws: int
    low_power: bool


def draw_uhat(data: PoissonData, beta, n_draws: int, rng: np.random.Generator, rows=None) -> np.ndarray:
    """``b_i u_i`` from ``n_draws`` independent draws of ``u | beta``; shape ``(n_draws, len(rows))``."""
    rows = np.arange(data.n) if rows is None else np.asarray(rows)
    lv = LinkValue.at(data.design @ np.asarray(beta, dtype=float))
    y = data.counts[rows]
    b = lv.b[rows]
    u = rng.gamma(y, 1.0 / b, size=(n_draws, rows.size))
    return b * u


def uhat_marginal_test(data: PoissonData, beta, n_draws: int, rng: np.random.Generator) -> list[UhatResult]:
    """KS distance between ``b_i u_i`` and ``Gamma(y_i, 1)`` for every row with ``y_i >= 1``."""
    rows = np.nonzero(data.counts >= 1)[0]
    skipped = data.n - rows.size
    if skipped:
        warnings.warn(f"{skipped} rows with y = 0 skipped", UserWarning, stacklevel=2)
    low_power = n_draws < 1000
    if low_power:
        warnings.warn(f"only {n_draws} draws; KS test has little power", LowPowerWarning, stacklevel=2)
    if rows.size == 0:
        return []
    uhat = draw_uhat(data, beta, n_draws, rng, rows)
    out = []
    for j, i in enumerate(rows):
        y = int(data.counts[i])
        res = stats.kstest(uhat[:, j], stats.gamma(y).cdf)
        out.append(UhatResult(int(i), y, float(res.statistic), float(res.pvalue), n_draws, low_power))
    return out


H_FUNCTIONS = {
    "square": (lambda t: t * t, 1.0),
    "abs": (np.abs, float(np.sqrt(2.0 / np.pi))),
    "fourth": (lambda t: t**4, 3.0),
}


def draw_that(data: PoissonData, beta, obs_index: int, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of ``c_hat * (sqrt(v_hat) - 1/sqrt(v_hat))`` for one observation.

    ``c = (n_i/2 + u_i) s_i``, ``v_hat = c v_i`` and ``c_hat = sqrt(c)``, with
    ``(u_i, v_i)`` drawn jointly from their conditional given ``beta``.
    """
    lv = LinkValue.at(data.design[obs_index] @ np.asarray(beta, dtype=float))
    y = int(data.counts[obs_index])
    if y < 1:
        raise ValueError("observation must have y >= 1")
    u = rng.gamma(y, 1.0 / float(lv.b), size=n_draws)
    c = (0.5 * data.exposures[obs_index] + u) * float(lv.s)
    v = inverse_gaussian_core(rng, 1.0 / c, 1.0, n_draws)
    root = np.sqrt(c * v)
    return np.sqrt(c) * (root - 1.0 / root)


def lemma4_bound_test(data: PoissonData, beta, obs_index: int, h_id: str, n_draws: int,
                      rng: np.random.Generator):
    """Monte Carlo ``E[h(t_hat) | beta]`` with its SE, and the bound ``2 E[h(z)]``.

    Returns ``(lhs_estimate, lhs_se, rhs_exact)``.
    """
    if h_id not in H_FUNCTIONS:
        raise ValueError(f"h_id must be one of {sorted(H_FUNCTIONS)}")
    h, normal_moment = H_FUNCTIONS[h_id]
    vals = h(draw_that(data, beta, obs_index, n_draws, rng))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_draws)), 2.0 * normal_moment


# ---------------------------------------------------------------------------
# drift

@dataclass
class DriftPoint:
    norm: float
    direction: np.ndarray
    energy: float
    pv: float
    pv_se: float
    error: str | None = None

    @property
    def ratio(self) -> float:
        return self.pv / self.energy if self.energy > 0 else np.inf

    @property
    def ratio_se(self) -> float:
        return self.pv_se / self.energy if self.energy > 0 else np.inf


@dataclass
class DriftReport:
    points: list[DriftPoint]
    n_mc: int

    def rows(self):
        for pt in self.points:
            yield {
                "norm": pt.norm, "direction": " ".join(f"{d:.6g}" for d in pt.direction),
                "V": pt.energy, "PV": pt.pv, "PV_se": pt.pv_se,
                "ratio": pt.ratio, "ratio_se": pt.ratio_se, "error": pt.error or "",
            }

    def at_norm(self, r: float) -> list[DriftPoint]:
        return [pt for pt in self.points if pt.norm == r]

    def worst_ratio_bound(self, r: float) -> float:
        """Largest ``ratio + 3 SE`` among probes at norm ``r`` (below 1 means drift holds there)."""
        pts = [pt for pt in self.at_norm(r) if pt.error is None]
        if not pts:
            return np.inf
        return max(pt.ratio + 3.0 * pt.ratio_se for pt in pts)


def one_step_energy(beta0, data: PoissonData, prior: GaussianPrior, n_mc: int,
                    rng: np.random.Generator) -> np.ndarray:
    """``V(beta')`` for ``n_mc`` independent single sweeps started at ``beta0``.

    Latents are drawn afresh from their ``beta0`` conditionals for every
    replicate, then one ``beta'`` per replicate; all replicates are batched.
    """
    X = data.design
    lv = LinkValue.at(X @ beta0)
    y = data.counts
    half_n = 0.5 * data.exposures
    u = np.zeros((n_mc, data.n))
    pos = y > 0
    if pos.any():
        u[:, pos] = rng.gamma(y[pos], 1.0 / lv.b[pos], size=(n_mc, int(pos.sum())))
    hn_u = half_n + u
    with np.errstate(over="ignore"):
        mu = np.maximum(1.0 / (hn_u * lv.s), 1e-300)
    v = inverse_gaussian_core(rng, mu, 1.0, mu.shape)
    w = v * hn_u**2
    precision = prior.precision + np.einsum("ri,ij,ik->rjk", w, X, X)
    shift = prior.shift + (u - half_n) @ X
    chol = np.linalg.cholesky(precision)
    half = np.linalg.solve(chol, shift[..., None])[..., 0]
    z = rng.standard_normal((n_mc, data.p))
    beta = np.linalg.solve(np.swapaxes(chol, -1, -2), (half + z)[..., None])[..., 0]
    return np.einsum("rj,jk,rk->r", beta, prior.precision, beta)


def empirical_drift(data: PoissonData, prior: GaussianPrior, norm_grid, n_directions: int,
                    n_mc: int, rng: np.random.Generator) -> DriftReport:
    """Estimate ``(PV)(beta0)`` at ``beta0 = r d`` over norms ``r`` and random unit ``d``.

    A norm of 0 is probed once at the origin. Numerical failures are recorded
    on the point and do not stop the scan.
    """
    grid = np.asarray(norm_grid, dtype=float)
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("norm_grid must be non-negative and strictly increasing")
    dirs = rng.standard_normal((n_directions, data.p))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    points = []
    for r in grid:
        for d in (dirs[:1] if r == 0 else dirs):
            beta0 = r * d
            energy = prior.energy(beta0)
            try:
                vals = one_step_energy(beta0, data, prior, n_mc, rng)
                if not np.all(np.isfinite(vals)):
                    raise FloatingPointError("non-finite energy")
                points.append(DriftPoint(float(r), d.copy(), energy, float(vals.mean()),
                                         float(vals.std(ddof=1) / np.sqrt(n_mc))))
            except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
                points.append(DriftPoint(float(r), d.copy(), energy, np.nan, np.nan, str(exc)))
    return DriftReport(points, n_mc)
