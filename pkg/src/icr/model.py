"""Variables, distributions and conditionals shared by every engine.

Variables are addressed by their 0-based declaration index. A scope (``VarSet``)
is a sorted tuple of such indices, and every tensor is laid out row-major with
one axis per scope member in that sorted order. Discrete conditional tables put
the parent axes first and the target axes last, each group sorted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ModelError,
    NotSubset,
    ScopeMismatch,
    SingularCovariance,
    SupportViolation,
    ZeroMarginal,
)

VarSet = tuple

SUM_TOL = 1e-12
SYM_TOL = 1e-12
PD_RTOL = 1e-10


def varset(members: Iterable[int]) -> tuple:
    """Canonical scope: sorted tuple of distinct non-negative indices."""
    items = [int(m) for m in members]
    if len(set(items)) != len(items):
        raise ModelError(f"duplicate variables in {items}")
    if any(m < 0 for m in items):
        raise ModelError(f"negative variable index in {items}")
    return tuple(sorted(items))


def _readonly(arr):
    arr.setflags(write=False)
    return arr


def reorder_axes(table, scope, order):
    """Transpose ``table`` laid out over ``scope`` so its axes follow ``order``."""
    perm = [scope.index(v) for v in order]
    return np.transpose(table, perm)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    support_size: int | None = None  # None marks a continuous variable

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ModelError("variable name must be a non-empty string")
        if self.support_size is not None:
            if int(self.support_size) != self.support_size or self.support_size < 2:
                raise ModelError(
                    f"variable {self.name!r}: support_size must be an integer >= 2"
                )

    @property
    def kind(self) -> str:
        return "continuous" if self.support_size is None else "discrete"


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Dense probability tensor over ``scope``."""

    scope: tuple
    table: np.ndarray

    def __post_init__(self):
        scope = varset(self.scope)
        if list(scope) != [int(v) for v in self.scope]:
            raise ModelError(f"scope {self.scope} is not sorted ascending")
        table = np.array(self.table, dtype=float)
        if table.ndim != len(scope):
            raise ModelError(
                f"table has {table.ndim} axes but scope has {len(scope)} members"
            )
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ModelError("probability table must be finite and non-negative")
        total = table.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ModelError(f"probability table sums to {total!r}, not 1")
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "table", _readonly(table))

    @classmethod
    def uniform(cls, scope, sizes):
        shape = tuple(int(s) for s in sizes)
        return cls(varset(scope), np.full(shape, 1.0 / max(1, int(np.prod(shape)))))

    @property
    def shape(self) -> tuple:
        return self.table.shape

    @property
    def sizes(self) -> dict:
        return dict(zip(self.scope, self.table.shape))

    def __repr__(self):
        return f"DiscreteDistribution(scope={self.scope}, shape={self.shape})"


@dataclass(frozen=True, eq=False)
class DiscreteConditional:
    """Conditional table of ``target`` given ``parents``.

    ``table[parent_config + target_config]`` is the probability of the target
    configuration; each parent slice is a distribution over the targets.
    """

    target: tuple
    parents: tuple
    table: np.ndarray

    def __post_init__(self):
        target, parents = varset(self.target), varset(self.parents)
        if not target:
            raise ModelError("conditional target must be non-empty")
        if set(target) & set(parents):
            raise ModelError(f"target {target} and parents {parents} overlap")
        table = np.array(self.table, dtype=float)
        if table.ndim != len(target) + len(parents):
            raise ModelError(
                f"conditional table has {table.ndim} axes, expected "
                f"{len(parents)} parent + {len(target)} target axes"
            )
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ModelError("conditional table must be finite and non-negative")
        slices = table.sum(axis=tuple(range(len(parents), table.ndim)))
        if np.any(np.abs(slices - 1.0) > SUM_TOL):
            raise ModelError("each parent slice of a conditional table must sum to 1")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "table", _readonly(table))

    @property
    def scope(self) -> tuple:
        return varset(self.target + self.parents)

    @property
    def sizes(self) -> dict:
        return dict(zip(self.parents + self.target, self.table.shape))

    def __repr__(self):
        return f"DiscreteConditional(target={self.target}, parents={self.parents})"


def _check_covariance(cov, what="covariance"):
    cov = np.array(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ModelError(f"{what} must be a square matrix")
    if not np.all(np.isfinite(cov)):
        raise SingularCovariance(f"{what} has non-finite entries")
    if cov.size == 0:
        return cov
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.T)) > SYM_TOL * scale:
        raise ModelError(f"{what} is not symmetric")
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= PD_RTOL * eig[-1] or eig[-1] <= 0:
        raise SingularCovariance(
            f"{what} is not positive definite (eigenvalues {eig[0]:.3g} .. {eig[-1]:.3g})"
        )
    return cov


@dataclass(frozen=True, eq=False)
class GaussianDistribution:
    scope: tuple
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        scope = varset(self.scope)
        if list(scope) != [int(v) for v in self.scope]:
            raise ModelError(f"scope {self.scope} is not sorted ascending")
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = _check_covariance(self.covariance)
        if mean.shape != (len(scope),) or cov.shape != (len(scope), len(scope)):
            raise ModelError("mean/covariance dimensions do not match the scope")
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "covariance", _readonly(cov))

    @classmethod
    def standard(cls, scope):
        k = len(scope)
        return cls(varset(scope), np.zeros(k), np.eye(k))

    def marginal(self, u) -> "GaussianDistribution":
        u = varset(u)
        if not set(u) <= set(self.scope):
            raise NotSubset(f"{u} is not a subset of scope {self.scope}")
        idx = [self.scope.index(v) for v in u]
        return GaussianDistribution(u, self.mean[idx], self.covariance[np.ix_(idx, idx)])

    def __repr__(self):
        return f"GaussianDistribution(scope={self.scope})"


@dataclass(frozen=True, eq=False)
class GaussianConditional:
    """Linear-Gaussian conditional: target ~ N(coef @ parents + intercept, cond_cov).

    Rows of ``coef`` follow the sorted target indices, columns the sorted parents.
    """

    target: tuple
    parents: tuple
    coef: np.ndarray
    intercept: np.ndarray
    cond_cov: np.ndarray

    def __post_init__(self):
        target, parents = varset(self.target), varset(self.parents)
        if not target:
            raise ModelError("conditional target must be non-empty")
        if set(target) & set(parents):
            raise ModelError(f"target {target} and parents {parents} overlap")
        coef = np.array(self.coef, dtype=float).reshape(len(target), len(parents))
        intercept = np.array(self.intercept, dtype=float).reshape(len(target))
        cond_cov = _check_covariance(self.cond_cov, "conditional covariance")
        if cond_cov.shape != (len(target), len(target)):
            raise ModelError("cond_cov dimensions do not match the target")
        if not (np.all(np.isfinite(coef)) and np.all(np.isfinite(intercept))):
            raise ModelError("coef and intercept must be finite")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "coef", _readonly(coef))
        object.__setattr__(self, "intercept", _readonly(intercept))
        object.__setattr__(self, "cond_cov", _readonly(cond_cov))

    @property
    def scope(self) -> tuple:
        return varset(self.target + self.parents)

    def __repr__(self):
        return f"GaussianConditional(target={self.target}, parents={self.parents})"


@dataclass(frozen=True, eq=False)
class ConditionalModel:
    """A collection of L >= 2 conditionals over declared variables."""

    variables: Sequence[VariableSpec]
    conditionals: Sequence = field(default_factory=list)

    def __post_init__(self):
        variables = tuple(self.variables)
        conditionals = tuple(self.conditionals)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise ModelError(f"variable names must be unique: {names}")
        if not variables:
            raise ModelError("model declares no variables")
        kinds = {v.kind for v in variables}
        if len(kinds) > 1:
            raise ModelError("mixed discrete/continuous models are not supported")
        if len(conditionals) < 2:
            raise ModelError("a conditional model needs at least two conditionals")
        expected = DiscreteConditional if "discrete" in kinds else GaussianConditional
        d = len(variables)
        for i, cond in enumerate(conditionals):
            if not isinstance(cond, expected):
                raise ModelError(f"conditional {i + 1} is not a {expected.__name__}")
            if any(v >= d for v in cond.scope):
                raise ModelError(f"conditional {i + 1} references an undeclared variable")
            if expected is DiscreteConditional:
                for v, size in cond.sizes.items():
                    if size != variables[v].support_size:
                        raise ModelError(
                            f"conditional {i + 1}: axis for {variables[v].name!r} has "
                            f"size {size}, declared support is {variables[v].support_size}"
                        )
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "conditionals", conditionals)

    @property
    def family(self) -> str:
        return "discrete" if self.variables[0].kind == "discrete" else "gaussian"

    @property
    def d(self) -> int:
        return len(self.variables)

    @property
    def L(self) -> int:
        return len(self.conditionals)

    @property
    def all_variables(self) -> tuple:
        return tuple(range(self.d))

    @property
    def support_sizes(self) -> tuple:
        return tuple(v.support_size for v in self.variables)

    def scope(self, i) -> tuple:
        return self.conditionals[i].scope

    def is_full(self, i) -> bool:
        return self.scope(i) == self.all_variables

    def index_of(self, name) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise ModelError(f"unknown variable {name!r}")

    def names(self, scope) -> list:
        return [self.variables[v].name for v in scope]

    def describe(self, i) -> str:
        """Human label such as ``f(X1|X2,X3)``."""
        cond = self.conditionals[i]
        target = ",".join(self.names(cond.target))
        if not cond.parents:
            return f"f({target})"
        return f"f({target}|{','.join(self.names(cond.parents))})"


def _check_same_scope(q, h):
    if q.scope != h.scope or q.table.shape != h.table.shape:
        raise ScopeMismatch(f"scopes differ: {q.scope} vs {h.scope}")


def marginalize(h: DiscreteDistribution, u) -> DiscreteDistribution:
    """Sum ``h`` over every scope member outside ``u``."""
    u = varset(u)
    if not set(u) <= set(h.scope):
        raise NotSubset(f"{u} is not a subset of scope {h.scope}")
    axes = tuple(k for k, v in enumerate(h.scope) if v not in u)
    return DiscreteDistribution(u, h.table.sum(axis=axes))


def _phi(x):
    # (1 + x) log(1 + x) - x, accurate near x = 0
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small]
    out[small] = xs * xs * (
        0.5 + xs * (-1 / 6 + xs * (1 / 12 + xs * (-1 / 20 + xs * (1 / 30 + xs * (-1 / 42 + xs / 56)))))
    )
    xl = x[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        big = (1.0 + xl) * np.log1p(xl) - xl
    out[~small] = np.where(xl == -1.0, 1.0, big)
    return out


def kl_divergence(q: DiscreteDistribution, h: DiscreteDistribution) -> float:
    """Kullback-Leibler divergence sum(q log(q/h)), with 0 log 0 = 0.

    Evaluated as sum(h * phi(q/h - 1)), which equals the usual sum for
    normalized inputs but keeps every term non-negative, so tiny divergences
    between nearly equal tables are not lost to cancellation.
    """
    _check_same_scope(q, h)
    qt, ht = q.table, h.table
    if np.any((qt > 0) & (ht == 0)):
        raise SupportViolation("q puts mass where h has none")
    pos = ht > 0
    x = (qt[pos] - ht[pos]) / ht[pos]
    return float(np.sum(ht[pos] * _phi(x)))


def total_variation(q: DiscreteDistribution, h: DiscreteDistribution) -> float:
    _check_same_scope(q, h)
    return 0.5 * float(np.abs(q.table - h.table).sum())


def gaussian_kl(q: GaussianDistribution, h: GaussianDistribution) -> float:
    """KL(q || h) between two multivariate normals on the same scope."""
    if q.scope != h.scope:
        raise ScopeMismatch(f"scopes differ: {q.scope} vs {h.scope}")
    return _gaussian_kl_raw(q.mean, q.covariance, h.mean, h.covariance)


def _gaussian_kl_raw(mq, sq, mh, sh):
    k = len(mq)
    try:
        ch = np.linalg.cholesky(sh)
        cq = np.linalg.cholesky(sq)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from None
    # tr(Sh^-1 Sq) = ||ch^-1 cq||_F^2
    m = np.linalg.solve(ch, cq)
    z = np.linalg.solve(ch, mh - mq)
    logdet = 2.0 * (np.sum(np.log(np.diag(ch))) - np.sum(np.log(np.diag(cq))))
    return 0.5 * float(np.sum(m * m) + z @ z - k + logdet)


def derive_conditionals(f: DiscreteDistribution, blocks, names=None) -> ConditionalModel:
    """Build the conditionals ``f_{a|b}`` of a known joint ``f``.

    ``blocks`` is a sequence of ``(target, parents)`` index collections. The
    returned model is compatible by construction.
    """
    d = len(f.scope)
    if f.scope != tuple(range(d)):
        raise ModelError("the joint must be indexed over variables 0..d-1")
    names = list(names) if names is not None else [f"X{i + 1}" for i in range(d)]
    variables = [VariableSpec(n, s) for n, s in zip(names, f.shape)]
    conditionals = []
    for a, b in blocks:
        a, b = varset(a), varset(b)
        c = varset(a + b)
        if not set(c) <= set(f.scope):
            raise NotSubset(f"block {a}|{b} is not inside the joint scope")
        fc = reorder_axes(marginalize(f, c).table, c, b + a)
        fb = marginalize(f, b).table
        if np.any(fb <= 0):
            raise ZeroMarginal(f"parent block {b} has a zero-probability configuration")
        table = fc / fb.reshape(fb.shape + (1,) * len(a))
        conditionals.append(DiscreteConditional(a, b, table))
    return ConditionalModel(variables, conditionals)
