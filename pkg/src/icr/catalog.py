"""Ready-made conditional models used in the docs, tests and CLI fixtures."""

import numpy as np

from .model import (
    ConditionalModel,
    DiscreteConditional,
    DiscreteDistribution,
    GaussianConditional,
    VariableSpec,
    derive_conditionals,
)


def _continuous(d):
    return [VariableSpec(f"X{i + 1}") for i in range(d)]


def gaussian_three_full():
    """Three incompatible Gaussian full conditionals.

    X1 | X2,X3 ~ N((-3 X2 - X3)/2, 1), X2 | X1,X3 ~ N((-X1 - X3)/2, 1),
    X3 | X1,X2 ~ N((-3 X1 - 3 X2)/2, 1). The cycle <2,1,3> has stationary
    limits; <1,2,3> does not.
    """
    conds = [
        GaussianConditional((0,), (1, 2), [[-1.5, -0.5]], [0.0], [[1.0]]),
        GaussianConditional((1,), (0, 2), [[-0.5, -0.5]], [0.0], [[1.0]]),
        GaussianConditional((2,), (0, 1), [[-1.5, -1.5]], [0.0], [[1.0]]),
    ]
    return ConditionalModel(_continuous(3), conds)


def gaussian_pairwise_cycle():
    """Gaussian model {X1|X2, X2|X3, X3|X1} with no full conditional."""
    conds = [
        GaussianConditional((0,), (1,), [[1 / 5]], [0.0], [[18 / 5]]),
        GaussianConditional((1,), (2,), [[-5 / 16]], [0.0], [[135 / 16]]),
        GaussianConditional((2,), (0,), [[-3 / 4]], [0.0], [[55 / 4]]),
    ]
    return ConditionalModel(_continuous(3), conds)


def binary_incompatible():
    """X1|X2 strongly dependent, X2|X1 independent of X1: no common joint."""
    variables = [VariableSpec("X1", 2), VariableSpec("X2", 2)]
    conds = [
        DiscreteConditional((0,), (1,), [[0.9, 0.1], [0.1, 0.9]]),
        DiscreteConditional((1,), (0,), [[0.5, 0.5], [0.5, 0.5]]),
    ]
    return ConditionalModel(variables, conds)


def random_joint(shape, rng, floor=0.05):
    """Strictly positive random joint over variables 0..len(shape)-1."""
    t = rng.uniform(floor, 1.0, size=tuple(shape))
    return DiscreteDistribution(tuple(range(len(shape))), t / t.sum())


def full_conditionals(f):
    d = len(f.scope)
    blocks = [((i,), tuple(j for j in range(d) if j != i)) for i in range(d)]
    return derive_conditionals(f, blocks)


def pcgs_blocks():
    """Blocks of the partially collapsed model {X1|X2, X3|X1, X2|X1,X3}."""
    return [((0,), (1,)), ((2,), (0,)), ((1,), (0, 2))]


def compatible_pcgs(f):
    return derive_conditionals(f, pcgs_blocks())


def example_joint(seed=2024, shape=(2, 2, 2)):
    return random_joint(shape, np.random.default_rng(seed))
