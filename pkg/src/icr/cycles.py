"""Permissible updating cycles.

An updating cycle is an ordering of a model's conditionals. Position ``i`` of
``order`` holds the (0-based) index of the conditional applied at that step;
position ``L`` wraps back to position 0. Displays use 1-based indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import NotAPermutation, NotPermissible, TooManyConditionals

MAX_ENUMERATE = 9


@dataclass(frozen=True)
class UpdatingCycle:
    order: tuple
    permissible: bool
    violations: tuple = ()
    strict: bool = False

    @property
    def L(self) -> int:
        return len(self.order)

    def label(self) -> str:
        return "<" + ",".join(str(i + 1) for i in self.order) + ">"

    def rotated(self, k) -> tuple:
        k %= self.L
        return self.order[k:] + self.order[:k]

    def canonical(self) -> tuple:
        """Rotation starting at the smallest conditional index."""
        return self.rotated(self.order.index(min(self.order)))

    def target_sequence(self, model) -> list:
        """Update order as target blocks, e.g. ``[(0,), (2,), (1,)]``."""
        return [model.conditionals[i].target for i in self.order]

    def superscripts(self, model) -> list:
        """Order labels of the stationary limit at each position.

        The limit reached right after the conditional at position ``i`` is
        labelled by the target blocks starting at ``i + 1`` and ending at
        ``i``, 1-based, e.g. ``"(2,1,3)"``.
        """
        targets = self.target_sequence(model)
        out = []
        for i in range(self.L):
            seq = targets[i + 1:] + targets[: i + 1]
            parts = ["".join(str(v + 1) for v in t) for t in seq]
            out.append("(" + ",".join(parts) + ")")
        return out

    def require_permissible(self):
        if not self.permissible:
            raise NotPermissible(
                f"updating cycle {self.label()} is not permissible", self.violations
            )
        return self


def _check_order(model, order) -> tuple:
    try:
        order = tuple(int(i) for i in order)
    except (TypeError, ValueError):
        raise NotAPermutation(f"order {order!r} is not a sequence of indices") from None
    if sorted(order) != list(range(model.L)):
        raise NotAPermutation(
            f"order {[i + 1 for i in order]} is not a permutation of 1..{model.L}"
        )
    return order


def is_permissible(model, order, strict=False) -> UpdatingCycle:
    """Check the cyclic parent-containment condition for ``order``.

    Every step needs ``b_next ⊆ c_current``. At least one step must also shed
    a variable (``c_current \\ b_next`` non-empty); with ``strict`` every step
    must.
    """
    order = _check_order(model, order)
    L = len(order)
    violations = []
    shrinking = []
    for i in range(L):
        cur, nxt = order[i], order[(i + 1) % L]
        c = set(model.scope(cur))
        b = set(model.conditionals[nxt].parents)
        if not b <= c:
            violations.append(
                (i, f"parents of conditional {nxt + 1} {model.describe(nxt)} are not "
                    f"contained in the scope of conditional {cur + 1} {model.describe(cur)}")
            )
            continue
        proper = bool(c - b)
        shrinking.append(proper)
        if strict and not proper:
            violations.append(
                (i, f"parents of conditional {nxt + 1} equal the whole scope of "
                    f"conditional {cur + 1} (strict mode needs a proper subset)")
            )
    if not violations and not any(shrinking):
        violations.append((None, "no step removes a variable from the scope"))
    return UpdatingCycle(order, not violations, tuple(violations), strict)


def enumerate_permissible(model, strict=False) -> list:
    """All permissible cycles, one per rotation class (canonical rotation)."""
    if model.L > MAX_ENUMERATE:
        raise TooManyConditionals(
            f"{model.L} conditionals; enumeration is limited to {MAX_ENUMERATE}"
        )
    out = []
    for rest in itertools.permutations(range(1, model.L)):
        cycle = is_permissible(model, (0,) + rest, strict=strict)
        if cycle.permissible:
            out.append(cycle)
    return out


def classify(model) -> list:
    return ["full" if model.is_full(i) else "non-full" for i in range(model.L)]
