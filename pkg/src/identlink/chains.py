"""Chain bookkeeping shared by every sampler: configs, draw storage, the runner."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .rand import CholeskyError, make_stream


@dataclass
class SamplerConfig:
    burn_in: int = 1000
    keep: int = 1000
    thin: int = 1
    n_chains: int = 1
    seed: int = 0
    init_beta: str | Sequence[float] = "prior-draw"
    store_latents: bool = False

    def __post_init__(self):
        if self.keep < 1:
            raise ValueError("keep must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if isinstance(self.init_beta, str) and self.init_beta not in ("prior-draw", "zero"):
            raise ValueError("init_beta must be 'prior-draw', 'zero' or a vector")

    @property
    def n_sweeps(self) -> int:
        return self.burn_in + self.keep * self.thin


@dataclass
class DrawMatrix:
    """Post-burn-in coefficient draws from one or more chains.

    Rows are ordered chain by chain; ``chain`` and ``sweep`` label each row
    (sweeps are 1-based and count burn-in).
    """

    beta: np.ndarray
    chain: np.ndarray
    sweep: np.ndarray
    seed: int | None = None
    names: list[str] | None = None
    meta: dict[str, Any] = field(default_factory=dict)
    latents: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.chain = np.asarray(self.chain, dtype=np.int64)
        self.sweep = np.asarray(self.sweep, dtype=np.int64)
        if self.names is None:
            self.names = [f"beta{k}" for k in range(self.beta.shape[1])]

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    def by_chain(self) -> list[np.ndarray]:
        return [self.beta[self.chain == c] for c in np.unique(self.chain)]


class SamplerError(RuntimeError):
    """A numerical failure located by chain and sweep."""

    def __init__(self, chain: int, sweep: int, cause: Exception):
        self.chain = chain
        self.sweep = sweep
        super().__init__(f"chain {chain}, sweep {sweep}: {cause}")


def run_chains_generic(
    init: Callable[[np.random.Generator], Any],
    step: Callable[[Any, np.random.Generator], Any],
    get_beta: Callable[[Any], np.ndarray],
    config: SamplerConfig,
    *,
    get_latents: Callable[[Any], dict[str, np.ndarray]] | None = None,
    names: list[str] | None = None,
    meta: dict[str, Any] | None = None,
    n_jobs: int = 1,
) -> DrawMatrix:
    """Run ``config.n_chains`` independent chains of ``step``.

    Chain ``c`` uses ``make_stream(config.seed, c)``, so the result does not
    depend on ``n_jobs``.
    """

    def one_chain(c):
        rng = make_stream(config.seed, c)
        state = init(rng)
        kept, sweeps, lat = [], [], []
        for t in range(1, config.n_sweeps + 1):
            try:
                state = step(state, rng)
            except (CholeskyError, np.linalg.LinAlgError, FloatingPointError) as exc:
                raise SamplerError(c, t, exc) from exc
            if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
                kept.append(np.array(get_beta(state), dtype=float))
                sweeps.append(t)
                if config.store_latents and get_latents is not None:
                    lat.append(get_latents(state))
        return np.array(kept), np.array(sweeps), lat

    chains = range(config.n_chains)
    if n_jobs > 1 and config.n_chains > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one_chain, chains))
    else:
        results = [one_chain(c) for c in chains]

    beta = np.vstack([r[0] for r in results])
    sweep = np.concatenate([r[1] for r in results])
    chain = np.repeat(np.arange(config.n_chains), [len(r[1]) for r in results])
    latents = None
    if config.store_latents and get_latents is not None:
        rows = [d for r in results for d in r[2]]
        latents = {k: np.array([d[k] for d in rows]) for k in rows[0]}
    return DrawMatrix(
        beta=beta, chain=chain, sweep=sweep, seed=config.seed,
        names=names, meta=dict(meta or {}), latents=latents,
    )
