"""Random fixtures and loop-based oracles shared by the test modules."""

import itertools

import numpy as np

from icr.model import (
    ConditionalModel,
    DiscreteConditional,
    DiscreteDistribution,
    VariableSpec,
)


def random_table(shape, rng, floor=0.0):
    t = rng.uniform(floor, 1.0, size=shape) + 1e-3
    return t / t.sum()


def random_dist(scope, sizes, rng, floor=0.0):
    return DiscreteDistribution(tuple(scope), random_table(tuple(sizes), rng, floor))


def random_conditional(target, parents, sizes, rng):
    shape = tuple(sizes[v] for v in parents) + tuple(sizes[v] for v in target)
    t = rng.uniform(0.05, 1.0, size=shape)
    t /= t.sum(axis=tuple(range(len(parents), len(shape))), keepdims=True)
    return DiscreteConditional(tuple(target), tuple(parents), t)


def random_model(blocks, sizes, rng):
    variables = [VariableSpec(f"X{i + 1}", s) for i, s in enumerate(sizes)]
    return ConditionalModel(
        variables, [random_conditional(a, b, sizes, rng) for a, b in blocks]
    )


def full_blocks(d):
    return [((i,), tuple(j for j in range(d) if j != i)) for i in range(d)]


def loop_marginal(dist, keep):
    """Marginal by explicit iteration over every cell."""
    keep = sorted(keep)
    pos = [dist.scope.index(v) for v in keep]
    out = np.zeros(tuple(dist.shape[p] for p in pos))
    for idx in itertools.product(*[range(s) for s in dist.shape]):
        out[tuple(idx[p] for p in pos)] += dist.table[idx]
    return out


def loop_reassemble(cond, marg_b):
    """f_{a|b} * f_b by iteration, laid out over the sorted union scope."""
    scope = sorted(cond.target + cond.parents)
    sizes = cond.sizes
    out = np.zeros(tuple(sizes[v] for v in scope))
    for idx in itertools.product(*[range(sizes[v]) for v in scope]):
        assign = dict(zip(scope, idx))
        xb = tuple(assign[v] for v in cond.parents)
        xa = tuple(assign[v] for v in cond.target)
        out[idx] = cond.table[xb + xa] * (marg_b[xb] if xb else marg_b)
    return out
