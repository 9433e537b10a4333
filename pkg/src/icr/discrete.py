"""Iterative conditional replacement for discrete conditional models."""

from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .cycles import UpdatingCycle, is_permissible
from .errors import (
    NoConvergence,
    NonUniqueFixedPoint,
    NotAllFull,
    NotPermissibleStep,
    ScopeMismatch,
    StateSpaceTooLarge,
    SupportViolation,
)
from .model import (
    DiscreteDistribution,
    kl_divergence,
    marginalize,
    reorder_axes,
    total_variation,
)

MAX_ORACLE_STATES = 4096


class Verdict(str, enum.Enum):
    COMPATIBLE = "compatible"
    INCOMPATIBLE = "incompatible"
    UNDECIDABLE = "undecidable"


@dataclass(frozen=True)
class IcrConfig:
    max_cycles: int = 10000
    kl_tol: float = 1e-24
    track: str = "kl"
    tv_tol: float = 1e-13
    compat_tol: float = 1e-9

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if self.kl_tol <= 0 or self.tv_tol <= 0 or self.compat_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.track not in ("kl", "tv"):
            raise ValueError("track must be 'kl' or 'tv'")


@dataclass(frozen=True, eq=False)
class IcrReport:
    """Outcome of :func:`icr_run`.

    ``stationary[i]`` is the limit of the iterates produced right after the
    conditional at cycle position ``i`` is applied; it lives on that
    conditional's scope. ``trace`` holds ``(k, i, kl_gap, tv_gap)`` rows: the
    gap between the position-``i`` iterate of cycle ``k`` and the one before
    it (the starting distribution counts as the last position of cycle -1).
    """

    cycle: UpdatingCycle
    stationary: list
    trace: list
    converged: bool
    cycles_used: int
    compatible: bool | None = None
    labels: list = field(default_factory=list)

    def traces(self, metric="kl") -> list:
        col = 2 if metric == "kl" else 3
        out = [[] for _ in range(self.cycle.L)]
        for row in self.trace:
            out[row[1]].append(row[col])
        return out

    def write_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cycle_index", "position", "kl_gap", "tv_gap"])
            for k, i, kl, tv in self.trace:
                writer.writerow([k, i + 1, repr(kl), repr(tv)])

    def to_dict(self, model) -> dict:
        return {
            "family": "discrete",
            "cycle": [i + 1 for i in self.cycle.order],
            "converged": self.converged,
            "cycles_used": self.cycles_used,
            "compatible": self.compatible,
            "stationary": [
                {
                    "position": i + 1,
                    "conditional": model.describe(j),
                    "label": self.labels[i] if self.labels else None,
                    "scope": model.names(dist.scope),
                    "table": dist.table.tolist(),
                }
                for i, (j, dist) in enumerate(zip(self.cycle.order, self.stationary))
            ],
        }


def _as_cycle(model, cycle) -> UpdatingCycle:
    if isinstance(cycle, UpdatingCycle):
        return cycle
    return is_permissible(model, cycle)


def conditional_replacement(h: DiscreteDistribution, f_ab) -> DiscreteDistribution:
    """Replace the ``a|b`` conditional of ``h`` by ``f_ab``, keeping ``h_b``."""
    if not set(f_ab.parents) <= set(h.scope):
        raise NotPermissibleStep(
            f"parents {f_ab.parents} are not contained in scope {h.scope}"
        )
    hs, fs = h.sizes, f_ab.sizes
    if any(hs[v] != fs[v] for v in f_ab.parents):
        raise ScopeMismatch("support sizes of the parent variables disagree")
    hb = marginalize(h, f_ab.parents).table
    joint = f_ab.table * hb.reshape(hb.shape + (1,) * len(f_ab.target))
    scope = f_ab.scope
    return DiscreteDistribution(scope, reorder_axes(joint, f_ab.parents + f_ab.target, scope))


def transition_matrix(scope, shape, f_ab) -> np.ndarray:
    """Markov transition matrix on the states of ``scope`` that redraws the
    target block from ``f_ab`` and keeps the parent block."""
    n = int(np.prod(shape))
    states = np.stack(np.unravel_index(np.arange(n), shape), axis=1)
    bpos = [scope.index(v) for v in f_ab.parents]
    apos = [scope.index(v) for v in f_ab.target]
    same_b = np.all(states[:, None, bpos] == states[None, :, bpos], axis=-1)
    dest = f_ab.table[tuple(states[:, bpos].T) + tuple(states[:, apos].T)]
    return same_b * dest[None, :]


def markov_kernel_apply(q: DiscreteDistribution, f_ab) -> DiscreteDistribution:
    """Apply ``f_ab`` as a transition matrix: returns ``q T``."""
    if q.scope != f_ab.scope:
        raise ScopeMismatch(f"kernel scope {f_ab.scope} differs from {q.scope}")
    T = transition_matrix(q.scope, q.shape, f_ab)
    return DiscreteDistribution(q.scope, (q.table.reshape(-1) @ T).reshape(q.shape))


def _gap(q, prev):
    try:
        kl = kl_divergence(q, prev)
    except SupportViolation:
        kl = float("inf")
    return kl, total_variation(q, prev)


def default_start(model, cycle) -> DiscreteDistribution:
    scope = model.scope(cycle.order[-1])
    return DiscreteDistribution.uniform(scope, [model.variables[v].support_size for v in scope])


def icr_run(model, cycle, q0=None, cfg=None, check=False) -> IcrReport:
    """Cycle the conditional replacements until every position settles.

    Returns a report whether or not the iteration converged; with ``check``
    a non-converged run raises :class:`NoConvergence` carrying the report.
    """
    cfg = cfg or IcrConfig()
    cycle = _as_cycle(model, cycle).require_permissible()
    order, L = cycle.order, cycle.L
    if q0 is None:
        q0 = default_start(model, cycle)
    if q0.scope != model.scope(order[-1]):
        raise ScopeMismatch(
            f"starting distribution must live on {model.scope(order[-1])}, got {q0.scope}"
        )
    conds = [model.conditionals[j] for j in order]
    tol = cfg.kl_tol if cfg.track == "kl" else cfg.tv_tol

    prev = [None] * L
    prev[-1] = q0
    trace = []
    q = q0
    converged = False
    k = 0
    for k in range(cfg.max_cycles):
        settled = True
        for i, cond in enumerate(conds):
            q = conditional_replacement(q, cond)
            if prev[i] is not None:
                kl, tv = _gap(q, prev[i])
                trace.append((k, i, kl, tv))
                if not (kl if cfg.track == "kl" else tv) < tol:
                    settled = False
            prev[i] = q
        if settled:
            converged = True
            break

    compatible = None
    if converged and all(model.is_full(j) for j in order):
        compatible = _pairwise_close(prev, cfg.compat_tol)
    report = IcrReport(
        cycle=cycle,
        stationary=prev,
        trace=trace,
        converged=converged,
        cycles_used=k + 1,
        compatible=compatible,
        labels=cycle.superscripts(model),
    )
    if check and not converged:
        raise NoConvergence(
            f"no convergence within {cfg.max_cycles} cycles for {cycle.label()}", report
        )
    return report


def _pairwise_close(dists, tol) -> bool:
    return all(
        total_variation(p, q) <= tol for p, q in itertools.combinations(dists, 2)
    )


def _states(sizes):
    return list(itertools.product(*[range(s) for s in sizes]))


def _step_matrix(model, from_scope, j):
    # explicit enumeration: M[x, y] = f_j(y_a | y_b) when y_b agrees with x_b
    cond = model.conditionals[j]
    sizes = model.support_sizes
    to_scope = cond.scope
    src = _states([sizes[v] for v in from_scope])
    dst = _states([sizes[v] for v in to_scope])
    dst_index = {s: n for n, s in enumerate(dst)}
    M = np.zeros((len(src), len(dst)))
    targets = _states([sizes[v] for v in cond.target])
    for r, x in enumerate(src):
        xb = tuple(x[from_scope.index(v)] for v in cond.parents)
        for ya in targets:
            assign = dict(zip(cond.parents, xb))
            assign.update(zip(cond.target, ya))
            y = tuple(assign[v] for v in to_scope)
            M[r, dst_index[y]] = cond.table[xb + ya]
    return M


def composite_matrix(model, cycle, position) -> np.ndarray:
    """Matrix of one full round of replacements returning to ``position``."""
    cycle = _as_cycle(model, cycle).require_permissible()
    order, L = cycle.order, cycle.L
    scope = model.scope(order[position])
    T = None
    for step in range(1, L + 1):
        j = order[(position + step) % L]
        M = _step_matrix(model, scope, j)
        T = M if T is None else T @ M
        scope = model.scope(j)
    return T


def brute_force_fixed_point(model, cycle, position) -> DiscreteDistribution:
    """Fixed point of the composite replacement map at ``position`` via an
    eigenvector of the explicitly assembled transition matrix."""
    total = int(np.prod(model.support_sizes))
    if total > MAX_ORACLE_STATES:
        raise StateSpaceTooLarge(f"{total} joint states exceed {MAX_ORACLE_STATES}")
    cycle = _as_cycle(model, cycle)
    T = composite_matrix(model, cycle, position)
    w, V = np.linalg.eig(T.T)
    near = np.flatnonzero(np.abs(w - 1.0) < 1e-8)
    if len(near) != 1:
        raise NonUniqueFixedPoint(
            f"eigenvalue 1 has multiplicity {len(near)} at position {position + 1}"
        )
    v = np.real(V[:, near[0]])
    v = v / v.sum()
    v[np.abs(v) < 1e-15] = 0.0
    v = np.clip(v, 0.0, None)
    v /= v.sum()
    scope = model.scope(cycle.order[position])
    shape = tuple(model.support_sizes[s] for s in scope)
    return DiscreteDistribution(scope, v.reshape(shape))


def compatibility_check(model, cycle, cfg=None, tol=1e-9) -> Verdict:
    """Compatible iff every position converges to the same joint (within TV ``tol``)."""
    cycle = _as_cycle(model, cycle).require_permissible()
    if not all(model.is_full(j) for j in range(model.L)):
        raise NotAllFull("every conditional must involve all variables")
    report = icr_run(model, cycle, cfg=cfg)
    if not report.converged:
        return Verdict.UNDECIDABLE
    if _pairwise_close(report.stationary, tol):
        return Verdict.COMPATIBLE
    return Verdict.INCOMPATIBLE


@dataclass(frozen=True)
class StationarityCheck:
    ok: bool
    position: int | None = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def mutual_stationarity_check(stationary, model, cycle, tol=1e-9) -> StationarityCheck:
    """Check that one replacement step maps each limit onto the next one and
    that neighbouring limits share the next conditional's parent marginal."""
    cycle = _as_cycle(model, cycle)
    order, L = cycle.order, cycle.L
    if len(stationary) != L:
        return StationarityCheck(False, None, f"expected {L} limits, got {len(stationary)}")
    for i, (j, dist) in enumerate(zip(order, stationary)):
        if dist.scope != model.scope(j):
            return StationarityCheck(False, i, f"limit {i + 1} has scope {dist.scope}")
    for i in range(L):
        nxt = (i + 1) % L
        cond = model.conditionals[order[nxt]]
        try:
            mapped = conditional_replacement(stationary[i], cond)
        except (NotPermissibleStep, ScopeMismatch) as exc:
            return StationarityCheck(False, i, str(exc))
        tv = total_variation(mapped, stationary[nxt])
        if tv > tol:
            return StationarityCheck(
                False, i, f"step from position {i + 1} misses limit {nxt + 1} (TV {tv:.3g})"
            )
        b = cond.parents
        tv_b = total_variation(marginalize(stationary[i], b), marginalize(stationary[nxt], b))
        if tv_b > tol:
            return StationarityCheck(
                False, i, f"positions {i + 1} and {nxt + 1} disagree on the parent marginal"
            )
    return StationarityCheck(True)


def propagate_limits(limit, model, cycle, position) -> list:
    """Given the limit at one position, one round of replacements yields the
    limits at every position of the cycle."""
    cycle = _as_cycle(model, cycle)
    order, L = cycle.order, cycle.L
    out = [None] * L
    out[position] = limit
    q = limit
    for step in range(1, L):
        i = (position + step) % L
        q = conditional_replacement(q, model.conditionals[order[i]])
        out[i] = q
    return out
