"""Moment-form conditional replacement for linear-Gaussian conditional models."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cycles import UpdatingCycle, is_permissible
from .discrete import StationarityCheck, Verdict
from .errors import (
    InconsistentMargins,
    NoConvergence,
    NotAllFull,
    NotPermissibleStep,
    NotPositiveDefinite,
    ScopeMismatch,
    SingularCovariance,
)
from .model import GaussianDistribution, _gaussian_kl_raw, varset

MARGIN_TOL = 1e-8


@dataclass(frozen=True)
class GaussianIcrConfig:
    max_cycles: int = 100000
    frob_tol: float = 1e-10
    blowup_threshold: float = 1e12
    compat_tol: float = 1e-8

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if min(self.frob_tol, self.blowup_threshold, self.compat_tol) <= 0:
            raise ValueError("tolerances and thresholds must be positive")


def _replace(scope, mean, cov, f):
    """Raw replacement on arrays; returns (scope, mean, cov) on f's scope."""
    b, a = f.parents, f.target
    try:
        idx = [scope.index(v) for v in b]
    except ValueError:
        raise NotPermissibleStep(f"parents {b} are not contained in scope {scope}") from None
    mb = mean[idx]
    Sb = cov[np.ix_(idx, idx)]
    A = f.coef
    ma = A @ mb + f.intercept
    Sab = A @ Sb
    Saa = Sab @ A.T + f.cond_cov
    Saa = 0.5 * (Saa + Saa.T)
    nb = len(b)
    out_scope = varset(a + b)
    perm = [(b + a).index(v) for v in out_scope]
    m = np.concatenate([mb, ma])[perm]
    full = np.empty((nb + len(a), nb + len(a)))
    full[:nb, :nb] = Sb
    full[:nb, nb:] = Sab.T
    full[nb:, :nb] = Sab
    full[nb:, nb:] = Saa
    return out_scope, m, full[np.ix_(perm, perm)]


def gaussian_replacement(h: GaussianDistribution, f_ab) -> GaussianDistribution:
    """Replace the ``a|b`` conditional of ``h`` by the linear-Gaussian ``f_ab``.

    The parent block of the result (mean and covariance) is copied from ``h``.
    """
    scope, mean, cov = _replace(h.scope, h.mean, h.covariance, f_ab)
    return GaussianDistribution(scope, mean, cov)


@dataclass(frozen=True, eq=False)
class GaussianIcrReport:
    """Outcome of :func:`gaussian_icr_run`.

    ``status`` is ``"converged"``, ``"diverged"`` (a covariance entry crossed
    the blow-up threshold) or ``"max_cycles"``. ``stationary`` is filled only
    when converged; ``last`` always holds the final iterate per position as
    ``(scope, mean, cov)`` arrays. Trace rows are
    ``(k, i, kl_gap, frob_gap, mean_gap)``.
    """

    cycle: UpdatingCycle
    status: str
    stationary: list
    last: list
    trace: list
    cycles_used: int
    compatible: bool | None = None
    labels: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def traces(self, metric="kl") -> list:
        col = {"kl": 2, "frob": 3, "mean": 4}[metric]
        out = [[] for _ in range(self.cycle.L)]
        for row in self.trace:
            out[row[1]].append(row[col])
        return out

    def write_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cycle_index", "position", "kl_gap", "frob_gap", "mean_gap"])
            for k, i, kl, frob, mgap in self.trace:
                writer.writerow([k, i + 1, repr(kl), repr(frob), repr(mgap)])

    def to_dict(self, model) -> dict:
        return {
            "family": "gaussian",
            "cycle": [i + 1 for i in self.cycle.order],
            "converged": self.converged,
            "status": self.status,
            "cycles_used": self.cycles_used,
            "compatible": self.compatible,
            "stationary": [
                {
                    "position": i + 1,
                    "conditional": model.describe(j),
                    "label": self.labels[i] if self.labels else None,
                    **distribution_to_dict(dist, model),
                }
                for i, (j, dist) in enumerate(zip(self.cycle.order, self.stationary))
            ],
        }


def distribution_to_dict(dist, model=None) -> dict:
    scope = model.names(dist.scope) if model is not None else list(dist.scope)
    return {
        "scope": scope,
        "mean": dist.mean.tolist(),
        "covariance": dist.covariance.tolist(),
    }


def _as_cycle(model, cycle):
    if isinstance(cycle, UpdatingCycle):
        return cycle
    return is_permissible(model, cycle)


def gaussian_icr_run(model, cycle, q0=None, cfg=None, check=False) -> GaussianIcrReport:
    cfg = cfg or GaussianIcrConfig()
    cycle = _as_cycle(model, cycle).require_permissible()
    order, L = cycle.order, cycle.L
    start_scope = model.scope(order[-1])
    if q0 is None:
        q0 = GaussianDistribution.standard(start_scope)
    if q0.scope != start_scope:
        raise ScopeMismatch(f"starting distribution must live on {start_scope}, got {q0.scope}")
    conds = [model.conditionals[j] for j in order]

    prev = [None] * L
    prev[-1] = (q0.scope, np.array(q0.mean), np.array(q0.covariance))
    state = prev[-1]
    trace = []
    status = "max_cycles"
    k = 0
    for k in range(cfg.max_cycles):
        settled = True
        blown = False
        for i, cond in enumerate(conds):
            state = _replace(*state, cond)
            _, m, S = state
            if not np.all(np.isfinite(S)) or np.max(np.abs(S)) > cfg.blowup_threshold:
                blown = True
                prev[i] = state
                break
            if prev[i] is not None:
                _, pm, pS = prev[i]
                frob = float(np.linalg.norm(S - pS))
                mgap = float(np.max(np.abs(m - pm))) if len(m) else 0.0
                try:
                    kl = _gaussian_kl_raw(m, S, pm, pS)
                except SingularCovariance:
                    kl = float("nan")
                trace.append((k, i, kl, frob, mgap))
                if not (frob < cfg.frob_tol and mgap < cfg.frob_tol):
                    settled = False
            prev[i] = state
        if blown:
            status = "diverged"
            break
        if settled:
            status = "converged"
            break

    stationary = []
    compatible = None
    if status == "converged":
        stationary = [GaussianDistribution(s, m, S) for s, m, S in prev]
        if all(model.is_full(j) for j in order):
            compatible = _pairwise_close(stationary, cfg.compat_tol)
    report = GaussianIcrReport(
        cycle=cycle,
        status=status,
        stationary=stationary,
        last=prev,
        trace=trace,
        cycles_used=k + 1,
        compatible=compatible,
        labels=cycle.superscripts(model),
    )
    if check and status != "converged":
        raise NoConvergence(f"{cycle.label()} is non-convergent ({status})", report)
    return report


def _param_gap(p, q) -> float:
    if p.scope != q.scope:
        return float("inf")
    return float(
        max(np.max(np.abs(p.mean - q.mean), initial=0.0),
            np.max(np.abs(p.covariance - q.covariance), initial=0.0))
    )


def _pairwise_close(dists, tol) -> bool:
    return all(_param_gap(p, q) <= tol for p, q in itertools.combinations(dists, 2))


def gaussian_compatibility_check(model, cycle, cfg=None, tol=1e-8) -> Verdict:
    cycle = _as_cycle(model, cycle).require_permissible()
    if not all(model.is_full(j) for j in range(model.L)):
        raise NotAllFull("every conditional must involve all variables")
    report = gaussian_icr_run(model, cycle, cfg=cfg)
    if not report.converged:
        return Verdict.UNDECIDABLE
    if _pairwise_close(report.stationary, tol):
        return Verdict.COMPATIBLE
    return Verdict.INCOMPATIBLE


def gaussian_mutual_stationarity_check(limits, model, cycle, tol=1e-8) -> StationarityCheck:
    cycle = _as_cycle(model, cycle)
    order, L = cycle.order, cycle.L
    if len(limits) != L:
        return StationarityCheck(False, None, f"expected {L} limits, got {len(limits)}")
    for i in range(L):
        nxt = (i + 1) % L
        cond = model.conditionals[order[nxt]]
        try:
            mapped = gaussian_replacement(limits[i], cond)
        except (NotPermissibleStep, SingularCovariance) as exc:
            return StationarityCheck(False, i, str(exc))
        gap = _param_gap(mapped, limits[nxt])
        if gap > tol:
            return StationarityCheck(
                False, i, f"step from position {i + 1} misses limit {nxt + 1} (gap {gap:.3g})"
            )
        b = cond.parents
        if _param_gap(limits[i].marginal(b), limits[nxt].marginal(b)) > tol:
            return StationarityCheck(
                False, i, f"positions {i + 1} and {nxt + 1} disagree on the parent marginal"
            )
    return StationarityCheck(True)


def gaussian_propagate_limits(limit, model, cycle, position) -> list:
    cycle = _as_cycle(model, cycle)
    order, L = cycle.order, cycle.L
    out = [None] * L
    out[position] = limit
    q = limit
    for step in range(1, L):
        i = (position + step) % L
        q = gaussian_replacement(q, model.conditionals[order[i]])
        out[i] = q
    return out


def assemble_trivariate(*margins) -> GaussianDistribution:
    """Joint normal on three variables from its three bivariate margins."""
    if len(margins) != 3 or any(len(m.scope) != 2 for m in margins):
        raise ScopeMismatch("need exactly three bivariate margins")
    scope = varset(set().union(*[m.scope for m in margins]))
    pairs = {m.scope for m in margins}
    if len(scope) != 3 or len(pairs) != 3:
        raise ScopeMismatch("margins must cover the three distinct pairs of three variables")
    pos = {v: n for n, v in enumerate(scope)}
    mean_parts = {v: [] for v in scope}
    var_parts = {v: [] for v in scope}
    cov = np.zeros((3, 3))
    for m in margins:
        (u, v) = m.scope
        for k, w in enumerate(m.scope):
            mean_parts[w].append(m.mean[k])
            var_parts[w].append(m.covariance[k, k])
        cov[pos[u], pos[v]] = cov[pos[v], pos[u]] = m.covariance[0, 1]
    mean = np.zeros(3)
    for w in scope:
        for parts, what in ((mean_parts[w], "mean"), (var_parts[w], "variance")):
            if abs(parts[0] - parts[1]) > MARGIN_TOL:
                raise InconsistentMargins(
                    f"{what} of variable {w} differs across margins: {parts[0]} vs {parts[1]}"
                )
        mean[pos[w]] = 0.5 * (mean_parts[w][0] + mean_parts[w][1])
        cov[pos[w], pos[w]] = 0.5 * (var_parts[w][0] + var_parts[w][1])
    try:
        return GaussianDistribution(scope, mean, cov)
    except SingularCovariance as exc:
        raise NotPositiveDefinite(f"assembled covariance is not positive definite: {exc}") from None


def rational_str(x, max_denominator=1000, tol=1e-9) -> str:
    """``"4.82 = 241/50"`` when ``x`` is that close to a small-denominator
    rational, otherwise a plain decimal."""
    frac = Fraction(float(x)).limit_denominator(max_denominator)
    if abs(float(frac) - x) <= tol:
        if frac.denominator == 1:
            return str(frac.numerator)
        return f"{float(frac):.6g} = {frac.numerator}/{frac.denominator}"
    return f"{x:.6g}"


def format_matrix(mat, names) -> str:
    cells = [[rational_str(v) for v in row] for row in np.atleast_2d(mat)]
    width = max([len(n) for n in names] + [len(c) for row in cells for c in row])
    lines = [" " * width + "  " + "  ".join(n.rjust(width) for n in names)]
    for name, row in zip(names, cells):
        lines.append(name.rjust(width) + "  " + "  ".join(c.rjust(width) for c in row))
    return "\n".join(lines)
