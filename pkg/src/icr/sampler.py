"""Stochastic Gibbs-type chains (GS, PCGS, PGS) for cross-checking ICR limits.

Each cycle position ``i`` redraws the target block of the conditional at that
position from its current parents and leaves every other coordinate alone.
Immediately afterwards the state restricted to that conditional's scope is
recorded into batch ``i``, so batch ``i`` estimates the ICR limit at position
``i``.

An ensemble of independent chains is advanced in lockstep; standard errors
come from the spread of the per-chain estimates, which accounts for the
autocorrelation inside each chain.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .cycles import UpdatingCycle, is_permissible
from .errors import ScopeMismatch
from .model import DiscreteDistribution, GaussianDistribution

Z_LIMIT = 4.0


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 10_000
    samples: int = 1_000_000
    seed: int = 0
    thin: int = 1
    chains: int = 1000

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("samples must be at least 2")
        if self.burn_in < 0 or self.thin < 1 or self.chains < 2:
            raise ValueError("burn_in must be >= 0, thin >= 1 and chains >= 2")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_chains(self) -> int:
        n = min(self.chains, self.samples)
        if self.samples % n:
            raise ValueError(
                f"samples ({self.samples}) must be a multiple of chains ({n})"
            )
        return n

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))


@dataclass(frozen=True, eq=False)
class BatchSummary:
    """Empirical distribution of the states recorded at one cycle position."""

    position: int
    scope: tuple
    count: int
    empirical_mean: np.ndarray | None = None
    empirical_cov: np.ndarray | None = None
    mean_se: np.ndarray | None = None
    cov_se: np.ndarray | None = None
    empirical_table: DiscreteDistribution | None = None
    table_se: np.ndarray | None = None

    @property
    def family(self) -> str:
        return "discrete" if self.empirical_table is not None else "gaussian"

    def to_dict(self, model=None) -> dict:
        names = model.names(self.scope) if model is not None else list(self.scope)
        out = {"position": self.position + 1, "scope": names, "count": self.count}
        if self.family == "discrete":
            out["table"] = self.empirical_table.table.tolist()
            out["standard_errors"] = self.table_se.tolist()
        else:
            out["mean"] = self.empirical_mean.tolist()
            out["covariance"] = self.empirical_cov.tolist()
            out["mean_se"] = self.mean_se.tolist()
            out["cov_se"] = self.cov_se.tolist()
        return out


def _as_cycle(model, cycle):
    if isinstance(cycle, UpdatingCycle):
        return cycle
    return is_permissible(model, cycle)


def run_chain(model, cycle, cfg=None) -> list:
    cfg = cfg or ChainConfig()
    cycle = _as_cycle(model, cycle).require_permissible()
    if model.family == "gaussian":
        return _run_gaussian(model, cycle, cfg)
    return _run_discrete(model, cycle, cfg)


def _drive(cfg, n_steps_per_cycle, step, record):
    per = cfg.samples // cfg.n_chains
    for _ in range(cfg.burn_in):
        for i in range(n_steps_per_cycle):
            step(i)
    for t in range(per * cfg.thin):
        keep = (t + 1) % cfg.thin == 0
        for i in range(n_steps_per_cycle):
            step(i)
            if keep:
                record(i)


def _run_gaussian(model, cycle, cfg):
    rng = cfg.generator()
    n = cfg.n_chains
    per = cfg.samples // n
    conds = [model.conditionals[j] for j in cycle.order]
    scopes = [list(model.scope(j)) for j in cycle.order]
    chol = [np.linalg.cholesky(c.cond_cov) for c in conds]
    x = rng.standard_normal((n, model.d))
    s1 = [np.zeros((n, len(s))) for s in scopes]
    s2 = [np.zeros((n, len(s), len(s))) for s in scopes]

    def step(i):
        c = conds[i]
        a, b = list(c.target), list(c.parents)
        noise = rng.standard_normal((n, len(a))) @ chol[i].T
        x[:, a] = x[:, b] @ c.coef.T + c.intercept + noise

    def record(i):
        xc = x[:, scopes[i]]
        s1[i] += xc
        s2[i] += xc[:, :, None] * xc[:, None, :]

    _drive(cfg, len(conds), step, record)

    out = []
    for i, scope in enumerate(scopes):
        m_chain = s1[i] / per
        mean = m_chain.mean(axis=0)
        second = s2[i] / per
        c_chain = (
            second
            - m_chain[:, :, None] * mean[None, None, :]
            - mean[None, :, None] * m_chain[:, None, :]
            + np.outer(mean, mean)[None]
        )
        cov = c_chain.mean(axis=0)
        out.append(
            BatchSummary(
                position=i,
                scope=tuple(scope),
                count=cfg.samples,
                empirical_mean=mean,
                empirical_cov=0.5 * (cov + cov.T),
                mean_se=m_chain.std(axis=0, ddof=1) / np.sqrt(n),
                cov_se=c_chain.std(axis=0, ddof=1) / np.sqrt(n),
            )
        )
    return out


def _run_discrete(model, cycle, cfg):
    rng = cfg.generator()
    n = cfg.n_chains
    per = cfg.samples // n
    sizes = model.support_sizes
    conds = [model.conditionals[j] for j in cycle.order]
    scopes = [list(model.scope(j)) for j in cycle.order]
    shapes = [tuple(sizes[v] for v in s) for s in scopes]
    ncells = [int(np.prod(s)) for s in shapes]
    prep = []
    for c in conds:
        a, b = list(c.target), list(c.parents)
        a_shape = tuple(sizes[v] for v in a)
        b_shape = tuple(sizes[v] for v in b)
        n_a = int(np.prod(a_shape))
        cum = np.cumsum(c.table.reshape(-1, n_a), axis=1)
        prep.append((a, b, a_shape, b_shape, cum))
    x = np.stack([rng.integers(0, s, size=n) for s in sizes], axis=1)
    counts = [np.zeros(n * k, dtype=np.int64) for k in ncells]
    offsets = [np.arange(n) * k for k in ncells]

    def step(i):
        a, b, a_shape, b_shape, cum = prep[i]
        pidx = np.ravel_multi_index(tuple(x[:, b].T), b_shape) if b else np.zeros(n, dtype=int)
        u = rng.random(n)
        rows = cum[pidx]
        k = np.minimum((u[:, None] >= rows).sum(axis=1), rows.shape[1] - 1)
        x[:, a] = np.stack(np.unravel_index(k, a_shape), axis=1)

    def record(i):
        cell = np.ravel_multi_index(tuple(x[:, scopes[i]].T), shapes[i])
        counts[i] += np.bincount(offsets[i] + cell, minlength=n * ncells[i])

    _drive(cfg, len(conds), step, record)

    out = []
    for i, scope in enumerate(scopes):
        per_chain = counts[i].reshape(n, ncells[i]) / per
        freq = per_chain.mean(axis=0)
        se = per_chain.std(axis=0, ddof=1) / np.sqrt(n)
        out.append(
            BatchSummary(
                position=i,
                scope=tuple(scope),
                count=cfg.samples,
                empirical_table=DiscreteDistribution(tuple(scope), (freq / freq.sum()).reshape(shapes[i])),
                table_se=se.reshape(shapes[i]),
            )
        )
    return out


@dataclass(frozen=True)
class Comparison:
    position: int
    max_z: float
    passed: bool
    z: np.ndarray

    def __bool__(self):
        return self.passed


def _zscores(est, ref, se, fallback_se):
    diff = est - ref
    se = np.where(se > 0, se, fallback_se)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / se, np.where(diff == 0, 0.0, np.inf))
    return z


def compare(batch: BatchSummary, limit, z_limit=Z_LIMIT) -> Comparison:
    """Per-entry z-scores of the batch estimate against an ICR limit."""
    if batch.count <= 0:
        raise ValueError("cannot compare an empty batch")
    if tuple(batch.scope) != tuple(limit.scope):
        raise ScopeMismatch(f"batch scope {batch.scope} differs from limit scope {limit.scope}")
    if isinstance(limit, DiscreteDistribution):
        if batch.empirical_table is None:
            raise ScopeMismatch("discrete limit compared with a Gaussian batch")
        ref = limit.table
        binom = np.sqrt(ref * (1 - ref) / batch.count)
        z = _zscores(batch.empirical_table.table, ref, batch.table_se, binom)
    elif isinstance(limit, GaussianDistribution):
        if batch.empirical_cov is None:
            raise ScopeMismatch("Gaussian limit compared with a discrete batch")
        iu = np.triu_indices(len(limit.scope))
        z_cov = _zscores(batch.empirical_cov[iu], limit.covariance[iu], batch.cov_se[iu], 0.0)
        z_mean = _zscores(batch.empirical_mean, limit.mean, batch.mean_se, 0.0)
        z = np.concatenate([z_mean, z_cov])
    else:
        raise TypeError(f"unsupported limit type {type(limit).__name__}")
    max_z = float(np.max(np.abs(z))) if z.size else 0.0
    return Comparison(batch.position, max_z, max_z <= z_limit, z)


def write_batches_json(batches, path, model=None):
    with open(path, "w") as fh:
        json.dump([b.to_dict(model) for b in batches], fh, indent=2)
        fh.write("\n")


def write_batches_csv(batches, path, model=None):
    """Long format: one row per (position, entry)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["position", "quantity", "index", "estimate", "standard_error"])
        for b in batches:
            if b.family == "discrete":
                for idx in np.ndindex(b.empirical_table.shape):
                    w.writerow([b.position + 1, "p", "-".join(map(str, idx)),
                                repr(float(b.empirical_table.table[idx])), repr(float(b.table_se[idx]))])
            else:
                for k in range(len(b.scope)):
                    w.writerow([b.position + 1, "mean", k, repr(float(b.empirical_mean[k])),
                                repr(float(b.mean_se[k]))])
                for r, c in zip(*np.triu_indices(len(b.scope))):
                    w.writerow([b.position + 1, "cov", f"{r}-{c}", repr(float(b.empirical_cov[r, c])),
                                repr(float(b.cov_se[r, c]))])
